"""Command-line entry point: generate, validate, train, eval, explain, gradcheck, report.

Exit status is 0 on success, 1 when a validation or check fails and 2 for
usage, configuration or input errors. Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import html
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import data
from .config import ConfigError, RunConfig, load_config
from .explain import (
    ExplainConfig,
    aggregate_bar,
    explain_all_classes,
    explain_predicted,
    render_reports,
    save_attributions,
)
from .metrics import build_confusion, compute_report
from .model import (
    FormatError,
    Model,
    ModelConfig,
    TrainConfig,
    gradient_check,
    init_parameters,
    load_checkpoint,
    random_batch,
    save_checkpoint,
    train,
)

logger = logging.getLogger("mathrel")

GRADCHECK_TOLERANCE = 1e-4


class UsageError(Exception):
    """Bad input discovered after argument parsing; exits with status 2."""


# -- helpers ------------------------------------------------------------------


def _setup_logging(verbose: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(message)s", stream=sys.stderr, force=True)


def _load_corpus(cfg: RunConfig, explicit: str | None = None) -> data.Corpus:
    path = Path(explicit) if explicit else cfg.corpus_path
    if not path.is_file():
        raise UsageError(f"corpus not found: {path} (run `mathrel generate` first or set data.corpus)")
    try:
        return data.load_corpus(path)
    except (data.SchemaError, data.DuplicateText) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _splits(cfg: RunConfig, corpus: data.Corpus):
    return data.split(corpus, data.SplitSpec(cfg.split.train_fraction, cfg.split.seed))


def _load_model(cfg: RunConfig, explicit: str | None) -> Model:
    path = Path(explicit) if explicit else cfg.out_dir / "checkpoint.json"
    if not path.is_file():
        raise UsageError(f"checkpoint not found: {path} (run `mathrel train` first)")
    try:
        params, mcfg, vocab = load_checkpoint(path)
    except (FormatError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    return Model(params, mcfg, vocab)


def _explain_config(cfg: RunConfig) -> ExplainConfig:
    e = cfg.explain
    return ExplainConfig(exact_limit=e.exact_limit, n_permutations=e.n_permutations, seed=e.seed)


# -- subcommands ----------------------------------------------------------------


def cmd_generate(cfg: RunConfig, args) -> int:
    g = cfg.generate
    try:
        corpus = data.generate_synthetic(g.n, g.distribution, seed=g.seed)
    except (data.InfeasibleDistribution, data.GenerationExhausted) as exc:
        raise UsageError(str(exc)) from None
    path = Path(args.out) if args.out else cfg.corpus_path
    data.save_corpus(corpus, path)
    dist = data.class_distribution(corpus)
    logger.info("wrote %d statements to %s", len(corpus), path)
    for label in data.RelationLabel:
        logger.info("  %-15s %6.2f%%", label.display, dist[label] * 100)
    return 0


def cmd_validate(cfg: RunConfig, args) -> int:
    corpus = _load_corpus(cfg, args.corpus)
    counts = {"valid": 0, "unwitnessed": 0, "mismatch": 0}
    for s in corpus:
        res = data.validate_statement(s)
        counts[res.status] += 1
        if res.status == "mismatch":
            print(f"{s.id}: {res.reason}: {s.text}", file=sys.stderr)
    print(f"valid {counts['valid']}  unwitnessed {counts['unwitnessed']}  mismatch {counts['mismatch']}")
    return 1 if counts["mismatch"] else 0


def cmd_train(cfg: RunConfig, args) -> int:
    corpus = _load_corpus(cfg, args.corpus)
    train_set, test_set = _splits(cfg, corpus)
    t = cfg.train
    tc = TrainConfig(learning_rate=t.learning_rate, batch_size=t.batch_size, epochs=t.epochs, seed=t.seed,
                     weight_decay=t.weight_decay, early_stop_patience=t.early_stop_patience,
                     verbose=cfg.verbose)
    model, history = train(train_set, test_set, asdict(cfg.model), tc)
    out = cfg.out_dir
    save_checkpoint(model.parameters, model.config, model.vocab, out / "checkpoint.json")
    history.to_csv(out / "history.csv")
    logger.info("final validation accuracy %.4f; wrote %s and %s",
                history.val_accuracy[-1], out / "checkpoint.json", out / "history.csv")
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    model = _load_model(cfg, args.checkpoint)
    _, test_set = _splits(cfg, _load_corpus(cfg, args.corpus))
    pred = [int(p) for p in model.predict(test_set.texts)]
    true = [int(s.relation) for s in test_set]
    matrix = build_confusion(true, pred)
    report = compute_report(matrix)
    out = cfg.out_dir
    matrix.to_csv(out / "confusion.csv")
    report.to_csv(out / "metrics.csv")
    report.to_json(out / "metrics.json")
    text = report.render()
    (out / "metrics.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def cmd_explain(cfg: RunConfig, args) -> int:
    model = _load_model(cfg, args.checkpoint)
    _, test_set = _splits(cfg, _load_corpus(cfg, args.corpus))
    ecfg = _explain_config(cfg)
    texts = list(cfg.explain.texts) or test_set.texts[: cfg.explain.n_sample_texts]
    samples = [a for text in texts for a in explain_all_classes(text, model, ecfg)]

    bar_pool = test_set.texts if cfg.explain.bar_texts is None else test_set.texts[: cfg.explain.bar_texts]
    groups = explain_predicted(bar_pool, model, ecfg)
    summaries = aggregate_bar(groups, cfg.explain.top_k, classes=[c for c in groups if groups[c]])

    out = cfg.out_dir / "explanations"
    out.mkdir(parents=True, exist_ok=True)
    save_attributions(samples, out / "samples.attributions", summaries)
    save_attributions([a for label in groups for a in groups[label]], out / "corpus.attributions")
    (out / "report.html").write_text(render_reports(samples, summaries, "html"), encoding="utf-8")
    if args.terminal:
        print(render_reports(samples, summaries, "terminal", color=not args.no_color and sys.stdout.isatty()), end="")
    logger.info("explained %d texts, aggregated %d; wrote %s", len(texts), len(bar_pool), out)
    return 0


def cmd_gradcheck(cfg: RunConfig, args) -> int:
    m = cfg.model
    mcfg = ModelConfig(vocab_size=40, d_model=m.d_model, n_layers=m.n_layers, n_heads=m.n_heads,
                       ffn_dim=m.ffn_dim, max_len=min(m.max_len, 12), dropout_rate=0.0)
    seed = cfg.train.seed if args.seed is None else args.seed
    params = init_parameters(mcfg, seed=seed, dtype=np.float64)
    batch = random_batch(mcfg, batch=args.batch, length=min(args.length, mcfg.max_len), seed=seed)
    worst, details = gradient_check(params, batch, mcfg, samples_per_group=args.samples, seed=seed,
                                    return_details=True)
    for name, err in details.items():
        logger.debug("%-24s %.3e", name, err)
    print(f"max relative error {worst:.3e}")
    if worst >= GRADCHECK_TOLERANCE:
        print(f"gradient check failed: {worst:.3e} >= {GRADCHECK_TOLERANCE:g}", file=sys.stderr)
        return 1
    return 0


def _csv_table(path: Path) -> str:
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return ""
    head = "".join(f"<th>{html.escape(c)}</th>" for c in rows[0])
    body = "".join("<tr>" + "".join(f"<td>{html.escape(c)}</td>" for c in r) + "</tr>" for r in rows[1:])
    return f"<table><thead><tr>{head}</tr></thead><tbody>{body}</tbody></table>"


def cmd_report(cfg: RunConfig, args) -> int:
    out = cfg.out_dir
    parts = []
    if (out / "metrics.txt").is_file():
        parts.append("<h2>Metrics</h2><pre>" + html.escape((out / "metrics.txt").read_text(encoding="utf-8")) + "</pre>")
    if (out / "confusion.csv").is_file():
        parts.append("<h2>Confusion matrix</h2>" + _csv_table(out / "confusion.csv"))
    if (out / "history.csv").is_file():
        parts.append("<h2>Training history</h2>" + _csv_table(out / "history.csv"))
    if (out / "explanations" / "report.html").is_file():
        parts.append('<h2>Explanations</h2><p><a href="explanations/report.html">Token attributions</a></p>')
    if not parts:
        raise UsageError(f"nothing to report in {out}")
    doc = (
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>mathrel run</title>\n"
        "<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}"
        "td,th{border:1px solid #ccc;padding:2px 6px;text-align:right}</style>\n</head>\n<body>\n"
        f"<h1>Run {html.escape(str(out))}</h1>\n" + "\n".join(parts) + "\n</body>\n</html>\n"
    )
    (out / "index.html").write_text(doc, encoding="utf-8")
    logger.info("wrote %s", out / "index.html")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "validate": cmd_validate,
    "train": cmd_train,
    "eval": cmd_eval,
    "explain": cmd_explain,
    "gradcheck": cmd_gradcheck,
    "report": cmd_report,
}


# -- argument parsing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--verbose", "-v", type=int, choices=(0, 1, 2), help="0 silent, 1 per epoch, 2 per batch")

    parser = argparse.ArgumentParser(prog="mathrel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic corpus CSV")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="corpus CSV path (default <output>/corpus.csv)")
    p.add_argument("--output", help="output directory")

    p = sub.add_parser("validate", parents=[common], help="check every statement's arithmetic")
    p.add_argument("--corpus")
    p.add_argument("--output", help="output directory")

    p = sub.add_parser("train", parents=[common], help="train and write checkpoint + history")
    p.add_argument("--corpus")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", "--output", dest="output", help="output directory")

    p = sub.add_parser("eval", parents=[common], help="confusion matrix and metrics on the test split")
    p.add_argument("--corpus")
    p.add_argument("--checkpoint")
    p.add_argument("--out", "--output", dest="output", help="output directory")

    p = sub.add_parser("explain", parents=[common], help="Shapley attributions and reports")
    p.add_argument("--corpus")
    p.add_argument("--checkpoint")
    p.add_argument("--text", action="append", help="text to explain (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-permutations", type=int)
    p.add_argument("--exact-limit", type=int)
    p.add_argument("--top-k", type=int)
    p.add_argument("--bar-texts", type=int)
    p.add_argument("--terminal", action="store_true", help="also print the report to standard output")
    p.add_argument("--no-color", action="store_true")
    p.add_argument("--out", "--output", dest="output", help="output directory")

    p = sub.add_parser("gradcheck", parents=[common], help="analytic vs finite-difference gradients")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, default=20, help="entries sampled per parameter tensor")
    p.add_argument("--batch", type=int, default=3)
    p.add_argument("--length", type=int, default=10)
    p.add_argument("--output", help="output directory")

    p = sub.add_parser("report", parents=[common], help="bundle outputs into index.html")
    p.add_argument("--out", "--output", dest="output", help="output directory")
    return parser


def _overrides(args) -> dict:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    ov = {"output": get("output"), "verbose": get("verbose")}
    if args.command == "generate":
        ov.update({"generate.n": get("n"), "generate.seed": get("seed")})
    elif args.command == "train":
        ov.update({"train.epochs": get("epochs"), "train.learning_rate": get("learning_rate"),
                   "train.batch_size": get("batch_size"), "train.seed": get("seed")})
    elif args.command == "explain":
        ov.update({"explain.seed": get("seed"), "explain.n_permutations": get("n_permutations"),
                   "explain.exact_limit": get("exact_limit"), "explain.top_k": get("top_k"),
                   "explain.bar_texts": get("bar_texts"), "explain.texts": get("text")})
    return ov


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        _setup_logging(cfg.verbose)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, UsageError) as exc:
        print(f"mathrel {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
