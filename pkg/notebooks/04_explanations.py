"""
Shapley token attributions
==========================

Exact Shapley values over 2**n masked coalitions for short texts,
permutation sampling for long ones, and the per-class bar summary.
Needs the checkpoint written by 02.
"""

# %%
import warnings
from pathlib import Path

import numpy as np

from mathrel.data import SplitSpec, load_corpus, split
from mathrel.explain import (
    EmptyGroup,
    ExplainConfig,
    ModelGame,
    ValueFunctionSpec,
    aggregate_bar,
    explain_all_classes,
    explain_predicted,
    render_reports,
    shapley_exact,
    shapley_sampled,
)
from mathrel.model import Model, load_checkpoint
from mathrel.preprocess import preprocess_pipeline

OUT = Path(__file__).parent / "out"
params, cfg, vocab = load_checkpoint(OUT / "checkpoint.json")
model = Model(params, cfg, vocab)

# %%
text = "The square root of eighty one is nine."
atts = explain_all_classes(text, model)
print(render_reports(atts, format="terminal"))
# base value plus the attributions lands on f_x for every class
print([round(a.efficiency_gap, 15) for a in atts])

# %%
# sampled vs exact on one text, for the predicted class
stream = preprocess_pipeline(text)
best = max(atts, key=lambda a: a.f_full).target_class
spec = ValueFunctionSpec(model, best)
exact = shapley_exact(stream, spec)
for n_perm in (50, 200, 2000):
    est = shapley_sampled(stream, spec, n_perm, seed=0)
    print(n_perm, "max error", np.abs(est.values - exact.values).max(), "mean se", est.std_error.mean())

# %%
# how many forward passes an exact run costs
for n in (8, 12, 15):
    print(n, "tokens ->", 2 ** n, "coalitions")
print(len(ModelGame(stream.tokens, spec).ids), "ids including [CLS]")

# %%
_, test_set = split(load_corpus(OUT / "corpus.csv"), SplitSpec(0.8, 0))
groups = explain_predicted(test_set.texts[:40], model, ExplainConfig(exact_limit=12))
with warnings.catch_warnings():
    warnings.simplefilter("ignore", EmptyGroup)
    bars = aggregate_bar(groups, k=8)
for label, bar in bars.items():
    print(label.display, [t for t, _ in bar.pairs[:4]], f"rest {bar.residual:.3f}")

(OUT / "report.html").write_text(render_reports(atts, bars, "html"), encoding="utf-8")
print("wrote", OUT / "report.html")
