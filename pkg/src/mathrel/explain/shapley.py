"""Shapley-value attributions over input tokens.

A *game* is any callable taking a boolean coalition matrix of shape
``(m, n_players)`` and returning ``m`` values (or an ``(m, C)`` array when
several outputs are explained at once). Coalitions are evaluated in batches,
each distinct coalition once.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..data import RelationLabel
from ..model.encoder import forward
from ..model.vocab import CLS, MASK
from ..preprocess import preprocess_pipeline

logger = logging.getLogger(__name__)

EXACT_LIMIT = 15


class TooManyTokens(ValueError):
    pass


@dataclass(frozen=True)
class ValueFunctionSpec:
    """Class probability of a trained model with masked-out tokens replaced by [MASK].

    ``target_class=None`` makes the value function return all class
    probabilities, one column per class.
    """

    model: object
    target_class: RelationLabel | None = None
    masking: str = "mask"
    batch_size: int = 1024

    def __post_init__(self):
        if self.masking != "mask":
            raise ValueError(f"unsupported masking strategy {self.masking!r}")


@dataclass(frozen=True)
class ExplainConfig:
    exact_limit: int = EXACT_LIMIT
    n_permutations: int = 2000
    seed: int = 0
    antithetic: bool = True
    batch_size: int = 1024


@dataclass(eq=False)
class Attribution:
    tokens: tuple[str, ...]
    values: np.ndarray
    base_value: float
    f_full: float
    target_class: RelationLabel | None = None
    method: str = "exact"
    n_permutations: int | None = None
    seed: int | None = None
    std_error: np.ndarray | None = None
    text: str = ""
    # (start, end) offsets of each token's source word in ``text``
    spans: tuple[tuple[int, int], ...] = field(default=())

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def efficiency_gap(self) -> float:
        return float(math.fsum(self.values) - (self.f_full - self.base_value))

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "tokens": list(self.tokens),
            "spans": [list(s) for s in self.spans],
            "target_class": None if self.target_class is None else self.target_class.name,
            "method": self.method,
            "n_permutations": self.n_permutations,
            "seed": self.seed,
            "base_value": float(self.base_value),
            "f_full": float(self.f_full),
            "values": [float(v) for v in self.values],
            "std_error": None if self.std_error is None else [float(v) for v in self.std_error],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Attribution":
        target = d.get("target_class")
        se = d.get("std_error")
        return cls(
            tokens=tuple(d["tokens"]),
            values=np.array(d["values"], dtype=np.float64),
            base_value=float(d["base_value"]),
            f_full=float(d["f_full"]),
            target_class=None if target is None else RelationLabel.parse(target),
            method=d.get("method", "exact"),
            n_permutations=d.get("n_permutations"),
            seed=d.get("seed"),
            std_error=None if se is None else np.array(se, dtype=np.float64),
            text=d.get("text", ""),
            spans=tuple(tuple(s) for s in d.get("spans", [])),
        )


class ModelGame:
    """Batched coalition values for one token sequence under a :class:`ValueFunctionSpec`."""

    def __init__(self, tokens: Sequence[str], spec: ValueFunctionSpec):
        model = spec.model
        if len(tokens) > model.config.max_len - 1:
            raise ValueError(f"{len(tokens)} tokens exceed max_len {model.config.max_len}")
        self.spec = spec
        self.n = len(tokens)
        self.ids = np.array([CLS] + [model.vocab.id(t) for t in tokens], dtype=np.int64)

    def __call__(self, coalitions: np.ndarray) -> np.ndarray:
        model = self.spec.model
        coalitions = np.asarray(coalitions, dtype=bool).reshape(-1, self.n)
        out = []
        for i in range(0, len(coalitions), self.spec.batch_size):
            chunk = coalitions[i : i + self.spec.batch_size]
            ids = np.tile(self.ids, (len(chunk), 1))
            ids[:, 1:][~chunk] = MASK
            ones = np.ones_like(ids)
            out.append(forward(ids, ones, np.zeros_like(ids), model.parameters, model.config))
        probs = (np.concatenate(out) if out else np.zeros((0, model.config.n_classes))).astype(np.float64)
        if self.spec.target_class is None:
            return probs
        return probs[:, int(self.spec.target_class)]


def set_function_game(v: Callable[[frozenset], float]) -> Callable[[np.ndarray], np.ndarray]:
    """Lift a function of player sets to a batched game."""

    def game(coalitions: np.ndarray) -> np.ndarray:
        coalitions = np.asarray(coalitions, dtype=bool)
        return np.array([v(frozenset(np.flatnonzero(row).tolist())) for row in coalitions], dtype=np.float64)

    return game


def _as_game(tokens: Sequence, spec) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(spec, ValueFunctionSpec):
        return ModelGame(tokens, spec)
    if callable(spec):
        return spec
    raise TypeError("spec must be a ValueFunctionSpec or a game callable")


def _evaluate(game, coalitions: np.ndarray) -> np.ndarray:
    v = np.asarray(game(coalitions), dtype=np.float64)
    if v.shape[0] != len(coalitions):
        raise ValueError("game returned the wrong number of values")
    return v.reshape(len(coalitions), -1)


def coalition_value(tokens: Sequence, S, spec) -> float | np.ndarray:
    """Value of the coalition ``S`` (token indices kept unmasked)."""
    n = len(tokens)
    row = np.zeros((1, n), dtype=bool)
    idx = list(S)
    if any(not 0 <= i < n for i in idx):
        raise IndexError(f"coalition {sorted(idx)} outside 0..{n - 1}")
    row[0, idx] = True
    v = _evaluate(_as_game(tokens, spec), row)[0]
    return float(v[0]) if v.size == 1 else v


def _all_coalitions(n: int) -> np.ndarray:
    masks = np.arange(1 << n, dtype=np.int64)
    return ((masks[:, None] >> np.arange(n)) & 1).astype(bool)


def exact_values(game, n: int):
    """Exact Shapley values by enumerating all ``2**n`` coalitions.

    Returns ``(phi, base, full)`` with ``phi`` of shape ``(n, C)``.
    """
    bits = _all_coalitions(n)
    v = _evaluate(game, bits)
    masks = np.arange(1 << n, dtype=np.int64)
    sizes = bits.sum(axis=1)
    # |S|! (n - |S| - 1)! / n!
    weights = np.array([1.0 / (n * math.comb(n - 1, s)) for s in range(n)])
    phi = np.zeros((n, v.shape[1]))
    for i in range(n):
        without = masks[~bits[:, i]]
        phi[i] = weights[sizes[without]] @ (v[without | (1 << i)] - v[without])
    return phi, v[0], v[-1]


def sampled_values(game, n: int, n_permutations: int, seed: int = 0, antithetic: bool = True, cache: bool = True):
    """Permutation-sampling estimate of the Shapley values.

    With ``antithetic`` each drawn permutation is paired with its reverse, so
    ``n_permutations`` is rounded up to an even count and the standard error
    is taken over pair means. Returns ``(phi, std_error, base, full)``.
    """
    if n_permutations < 2:
        raise ValueError("n_permutations must be at least 2")
    rng = np.random.default_rng(seed)
    if antithetic:
        half = np.stack([rng.permutation(n) for _ in range(-(-n_permutations // 2))])
        perms = np.empty((2 * len(half), n), dtype=np.int64)
        perms[0::2] = half
        perms[1::2] = half[:, ::-1]
    else:
        perms = np.stack([rng.permutation(n) for _ in range(n_permutations)])
    p = len(perms)

    # prefix coalitions: row k of permutation j holds its first k players
    onehot = np.zeros((p, n, n), dtype=bool)
    onehot[np.arange(p)[:, None], np.arange(n)[None, :], perms] = True
    prefix = np.zeros((p, n + 1, n), dtype=bool)
    np.logical_or.accumulate(onehot, axis=1, out=prefix[:, 1:])
    flat = prefix.reshape(-1, n)
    if cache:
        keys = np.packbits(flat, axis=1)
        _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        vals = _evaluate(game, flat[first])[inverse.reshape(-1)]
    else:
        vals = _evaluate(game, flat)
    vals = vals.reshape(p, n + 1, -1)

    marginal = vals[:, 1:] - vals[:, :-1]
    contrib = np.empty_like(marginal)
    contrib[np.arange(p)[:, None], perms] = marginal
    units = contrib.reshape(p // 2, 2, n, -1).mean(axis=1) if antithetic else contrib
    phi = units.mean(axis=0)
    if len(units) > 1:
        se = units.std(axis=0, ddof=1) / np.sqrt(len(units))
    else:
        se = np.zeros_like(phi)
    return phi, se, vals[0, 0], vals[0, -1]


def _token_info(tokens):
    """Tokens plus optional source text and spans when given a TokenStream."""
    if hasattr(tokens, "tokens") and hasattr(tokens, "spans"):
        return tuple(tokens.tokens), tokens.source_text, tuple(tokens.spans)
    return tuple(tokens), "", ()


def _target(spec) -> RelationLabel | None:
    return spec.target_class if isinstance(spec, ValueFunctionSpec) else None


def shapley_exact(tokens, spec, exact_limit: int = EXACT_LIMIT) -> Attribution:
    toks, text, spans = _token_info(tokens)
    n = len(toks)
    if n > exact_limit:
        raise TooManyTokens(f"{n} tokens exceed the exact limit of {exact_limit}")
    game = _as_game(toks, spec)
    phi, base, full = exact_values(game, n)
    if phi.shape[1] != 1:
        raise ValueError("game returns several outputs; use a single-class value function")
    return Attribution(toks, phi[:, 0], float(base[0]), float(full[0]), _target(spec), "exact",
                       text=text, spans=spans)


def shapley_sampled(tokens, spec, n_permutations: int = 2000, seed: int = 0,
                    antithetic: bool = True, cache: bool = True) -> Attribution:
    toks, text, spans = _token_info(tokens)
    n = len(toks)
    game = _as_game(toks, spec)
    if n <= 1:
        # a single ordering exists, the estimate is exact
        phi, base, full = exact_values(game, n)
        se = np.zeros_like(phi)
    else:
        phi, se, base, full = sampled_values(game, n, n_permutations, seed, antithetic, cache)
    if phi.shape[1] != 1:
        raise ValueError("game returns several outputs; use a single-class value function")
    return Attribution(toks, phi[:, 0], float(base[0]), float(full[0]), _target(spec), "sampled",
                       n_permutations, seed, se[:, 0], text, spans)


def explain_all_classes(text: str, model, config: ExplainConfig | None = None) -> list[Attribution]:
    """One attribution per relation class over the same tokens.

    Texts longer than ``config.exact_limit`` tokens use permutation sampling.
    """
    cfg = config or ExplainConfig()
    stream = preprocess_pipeline(text)
    keep = model.config.max_len - 1
    toks, spans = tuple(stream.tokens[:keep]), tuple(stream.spans[:keep])
    n = len(toks)
    game = ModelGame(toks, ValueFunctionSpec(model, None, batch_size=cfg.batch_size))
    if n <= cfg.exact_limit:
        phi, base, full = exact_values(game, n)
        se, method, n_perm, seed = None, "exact", None, None
    else:
        logger.info("%d tokens exceed exact limit %d, sampling %d permutations",
                    n, cfg.exact_limit, cfg.n_permutations)
        phi, se, base, full = sampled_values(game, n, cfg.n_permutations, cfg.seed, cfg.antithetic)
        method, n_perm, seed = "sampled", cfg.n_permutations, cfg.seed
    return [
        Attribution(toks, phi[:, c].copy(), float(base[c]), float(full[c]), label, method, n_perm, seed,
                    None if se is None else se[:, c].copy(), text, spans)
        for c, label in enumerate(RelationLabel)
    ]


def explain_predicted(texts: Sequence[str], model, config: ExplainConfig | None = None):
    """Attribution of each text's predicted class, grouped by that class."""
    groups: dict[RelationLabel, list[Attribution]] = {label: [] for label in RelationLabel}
    for text in texts:
        per_class = explain_all_classes(text, model, config)
        best = max(per_class, key=lambda a: a.f_full)
        groups[best.target_class].append(best)
    return groups
