"""Training loop, evaluation helpers and prediction."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..data import Corpus, EmptyCorpus, RelationLabel
from ..preprocess import preprocess_pipeline
from .encoder import (
    ModelConfig,
    backward,
    cross_entropy,
    forward,
    init_parameters,
    is_decayed,
)
from .optim import AdamW
from .vocab import Vocab, build_vocab, encode_tokens, stack

logger = logging.getLogger(__name__)


class DivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-4
    batch_size: int = 12
    epochs: int = 40
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.01
    early_stop_patience: int | None = None
    verbose: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_loss)

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss", "val_accuracy"])
            for i, row in enumerate(zip(self.train_loss, self.val_loss, self.val_accuracy), start=1):
                w.writerow([i, *(repr(float(x)) for x in row)])


@dataclass
class Model:
    """Trained parameters with the configuration and vocabulary they belong to."""

    parameters: dict[str, np.ndarray]
    config: ModelConfig
    vocab: Vocab

    def tokens(self, text: str) -> list[str]:
        return list(preprocess_pipeline(text).tokens[: self.config.max_len - 1])

    def encode_arrays(self, texts: Sequence[str]):
        return stack([encode_tokens(self.tokens(t), self.vocab, self.config.max_len) for t in texts])

    def predict_proba_ids(self, ids, mask, seg, batch_size: int = 512) -> np.ndarray:
        out = []
        for i in range(0, len(ids), batch_size):
            out.append(forward(ids[i : i + batch_size], mask[i : i + batch_size], seg[i : i + batch_size],
                               self.parameters, self.config))
        if not out:
            return np.zeros((0, self.config.n_classes), dtype=self.parameters["tok_emb"].dtype)
        return np.concatenate(out)

    def predict_proba(self, texts: Sequence[str], batch_size: int = 512) -> np.ndarray:
        if not len(texts):
            return np.zeros((0, self.config.n_classes))
        return self.predict_proba_ids(*self.encode_arrays(texts), batch_size=batch_size)

    def predict(self, texts: Sequence[str]) -> list[RelationLabel]:
        return [RelationLabel(int(i)) for i in np.argmax(self.predict_proba(texts), axis=1)]


def predict(text: str, parameters, vocab: Vocab, config: ModelConfig) -> tuple[RelationLabel, np.ndarray]:
    """Eval-mode class and probabilities; ties go to the lowest class code."""
    probs = Model(parameters, config, vocab).predict_proba([text])[0]
    return RelationLabel(int(np.argmax(probs))), probs


def _encode_corpus(corpus: Corpus, vocab: Vocab, max_len: int):
    enc = [encode_tokens(preprocess_pipeline(t).tokens, vocab, max_len) for t in corpus.texts]
    ids = np.stack([e.ids for e in enc])
    mask = np.stack([e.attention_mask for e in enc])
    seg = np.stack([e.segment_ids for e in enc])
    labels = np.array([int(s.relation) for s in corpus], dtype=np.int64)
    return ids, mask, seg, labels


def _trim(ids, mask, seg):
    width = max(int(mask.sum(axis=1).max()), 1)
    return ids[:, :width], mask[:, :width], seg[:, :width]


def evaluate_arrays(params, cfg, ids, mask, seg, labels, batch_size=256):
    """Mean cross-entropy and accuracy in eval mode."""
    probs = np.concatenate([
        forward(*_trim(ids[i : i + batch_size], mask[i : i + batch_size], seg[i : i + batch_size]), params, cfg)
        for i in range(0, len(ids), batch_size)
    ])
    acc = float(np.mean(np.argmax(probs, axis=1) == labels))
    return cross_entropy(probs, labels), acc


def train(
    train_corpus: Corpus,
    val_corpus: Corpus,
    model_config: ModelConfig | dict | None = None,
    train_config: TrainConfig | None = None,
    vocab: Vocab | None = None,
) -> tuple[Model, TrainHistory]:
    """Fit the classifier with mean cross-entropy and AdamW.

    ``model_config`` may be a dict of overrides; ``vocab_size`` is filled in
    from the vocabulary built on ``train_corpus``. Returns the final-epoch
    model and the per-epoch history.
    """
    if not len(train_corpus) or not len(val_corpus):
        raise EmptyCorpus("train and validation corpora must be non-empty")
    tc = train_config or TrainConfig()
    vocab = vocab or build_vocab(train_corpus)
    if isinstance(model_config, ModelConfig):
        cfg = ModelConfig(**{**asdict(model_config), "vocab_size": len(vocab)})
    else:
        cfg = ModelConfig(vocab_size=len(vocab), **(model_config or {}))

    rng = np.random.default_rng(tc.seed)
    params = init_parameters(cfg, seed=int(rng.integers(2**31)), dtype=np.float32)
    opt = AdamW(
        params,
        lr=tc.learning_rate,
        betas=(tc.beta1, tc.beta2),
        eps=tc.epsilon,
        weight_decay=tc.weight_decay,
        decay=[n for n in params if is_decayed(n)],
    )
    tr = _encode_corpus(train_corpus, vocab, cfg.max_len)
    va = _encode_corpus(val_corpus, vocab, cfg.max_len)
    n = len(tr[0])

    history = TrainHistory()
    best, stale = np.inf, 0
    for epoch in range(1, tc.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, tc.batch_size)):
            idx = order[start : start + tc.batch_size]
            ids, mask, seg = _trim(tr[0][idx], tr[1][idx], tr[2][idx])
            labels = tr[3][idx]
            probs, cache = forward(ids, mask, seg, params, cfg, train=True, rng=rng, return_cache=True)
            loss = cross_entropy(probs, labels)
            if not np.isfinite(loss):
                raise DivergenceError(f"loss became {loss} at epoch {epoch}, batch {b}")
            opt.step(backward(probs, labels, cache, params, cfg))
            total += loss * len(idx)
            if tc.verbose >= 2:
                logger.info("epoch %d batch %d loss %.4f", epoch, b, loss)
        val_loss, val_acc = evaluate_arrays(params, cfg, *va)
        history.train_loss.append(total / n)
        history.val_loss.append(val_loss)
        history.val_accuracy.append(val_acc)
        if tc.verbose >= 1:
            logger.info("epoch %d/%d train_loss %.4f val_loss %.4f val_acc %.4f",
                        epoch, tc.epochs, total / n, val_loss, val_acc)
        if tc.early_stop_patience:
            if val_loss < best - 1e-6:
                best, stale = val_loss, 0
            else:
                stale += 1
                if stale >= tc.early_stop_patience:
                    break
    return Model(params, cfg, vocab), history
