"""Run configuration: a YAML file with defaults for every field.

Precedence is command-line flag, then config file, then ``MATHREL_SEED``
(for the seed fields only), then the built-in default.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any

import yaml

from .data import RelationLabel

SEED_ENV = "MATHREL_SEED"


class ConfigError(ValueError):
    def __init__(self, field_path: str, message: str = "invalid value"):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


@dataclass
class DataSection:
    corpus: str | None = None  # existing corpus CSV; default is <output>/corpus.csv


@dataclass
class GenerateSection:
    n: int = 3284
    seed: int = 0
    distribution: dict[str, float] | None = None


@dataclass
class SplitSection:
    train_fraction: float = 0.8
    seed: int = 0


@dataclass
class ModelSection:
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    ffn_dim: int = 256
    max_len: int = 50
    dropout_rate: float = 0.1


@dataclass
class TrainSection:
    learning_rate: float = 2e-4
    batch_size: int = 12
    epochs: int = 10
    seed: int = 0
    weight_decay: float = 0.01
    early_stop_patience: int | None = None


@dataclass
class ExplainSection:
    exact_limit: int = 15
    n_permutations: int = 2000
    seed: int = 0
    top_k: int = 10
    texts: list[str] = field(default_factory=list)
    n_sample_texts: int = 3  # test statements explained when ``texts`` is empty
    bar_texts: int | None = 30  # test statements aggregated into the bar plots; None for all


@dataclass
class RunConfig:
    data: DataSection = field(default_factory=DataSection)
    generate: GenerateSection = field(default_factory=GenerateSection)
    split: SplitSection = field(default_factory=SplitSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    explain: ExplainSection = field(default_factory=ExplainSection)
    output: str = "out"
    verbose: int = 1

    @property
    def out_dir(self) -> Path:
        return Path(self.output)

    @property
    def corpus_path(self) -> Path:
        return Path(self.data.corpus) if self.data.corpus else self.out_dir / "corpus.csv"

    @property
    def epochs(self) -> int:
        return self.train.epochs

    def to_dict(self) -> dict:
        return asdict(self)


SEED_FIELDS = ("generate.seed", "split.seed", "train.seed", "explain.seed")


def _check_type(path: str, value, annotation: str):
    """Coerce a YAML scalar to the field's declared type or raise ConfigError."""
    optional = "None" in annotation
    if value is None:
        if optional:
            return None
        raise ConfigError(path, "must not be null")
    base = annotation.replace(" | None", "").strip()
    if base == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if base == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if base == "str":
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if base.startswith("list"):
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(path, "expected a list of strings")
        return list(value)
    if base.startswith("dict"):
        if not isinstance(value, dict):
            raise ConfigError(path, "expected a mapping")
        return dict(value)
    return value


def _merge(obj, updates: dict, prefix: str = ""):
    if not isinstance(updates, dict):
        raise ConfigError(prefix.rstrip(".") or "<root>", "expected a mapping")
    known = {f.name: f for f in fields(obj)}
    changes = {}
    for key, value in updates.items():
        path = f"{prefix}{key}"
        if key not in known:
            raise ConfigError(path, "unknown field")
        current = getattr(obj, key)
        if is_dataclass(current):
            changes[key] = _merge(current, value if value is not None else {}, path + ".")
        else:
            changes[key] = _check_type(path, value, str(known[key].type))
    return replace(obj, **changes)


def _positive(cfg: RunConfig, path: str, strict: bool = True):
    section, name = path.split(".")
    v = getattr(getattr(cfg, section), name)
    if v is not None and (v <= 0 if strict else v < 0):
        raise ConfigError(path, f"must be {'positive' if strict else 'non-negative'}, got {v!r}")


def validate(cfg: RunConfig) -> RunConfig:
    for path in ("generate.n", "model.d_model", "model.n_layers", "model.n_heads", "model.ffn_dim",
                 "model.max_len", "train.learning_rate", "train.batch_size", "train.epochs",
                 "train.early_stop_patience", "explain.n_permutations", "explain.bar_texts"):
        _positive(cfg, path)
    for path in ("train.weight_decay", "explain.exact_limit", "explain.top_k", "explain.n_sample_texts"):
        _positive(cfg, path, strict=False)
    if cfg.generate.n < 6:
        raise ConfigError("generate.n", "need at least 6 statements")
    if cfg.generate.distribution is not None:
        for key, frac in cfg.generate.distribution.items():
            try:
                RelationLabel.parse(key)
            except ValueError:
                raise ConfigError(f"generate.distribution.{key}", "unknown relation") from None
            if isinstance(frac, bool) or not isinstance(frac, (int, float)) or frac < 0:
                raise ConfigError(f"generate.distribution.{key}", "expected a non-negative number")
    if not 0 < cfg.split.train_fraction < 1:
        raise ConfigError("split.train_fraction", "must lie strictly between 0 and 1")
    if cfg.model.d_model % cfg.model.n_heads:
        raise ConfigError("model.n_heads", "must divide model.d_model")
    if cfg.model.max_len < 2:
        raise ConfigError("model.max_len", "must be at least 2")
    if not 0 <= cfg.model.dropout_rate < 1:
        raise ConfigError("model.dropout_rate", "must lie in [0, 1)")
    if cfg.explain.n_permutations < 2:
        raise ConfigError("explain.n_permutations", "must be at least 2")
    if cfg.data.corpus is not None and not Path(cfg.data.corpus).is_file():
        raise ConfigError("data.corpus", f"file not found: {cfg.data.corpus}")
    out = cfg.out_dir
    if out.exists() and not out.is_dir():
        raise ConfigError("output", f"not a directory: {out}")
    if cfg.verbose not in (0, 1, 2):
        raise ConfigError("verbose", "must be 0, 1 or 2")
    return cfg


def _env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(SEED_ENV, f"expected an integer, got {raw!r}") from None


def _nested(path: str, value) -> dict:
    out: dict = {}
    node = out
    *head, last = path.split(".")
    for key in head:
        node = node.setdefault(key, {})
    node[last] = value
    return out


def _deep_update(base: dict, extra: dict) -> dict:
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def load_config(path=None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Defaults, then ``MATHREL_SEED``, then the YAML file, then ``overrides``.

    ``overrides`` maps dotted field paths (``"train.epochs"``) to values.
    """
    layers: dict = {}
    seed = _env_seed()
    if seed is not None:
        for p in SEED_FIELDS:
            _deep_update(layers, _nested(p, seed))
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError("config", f"file not found: {path}")
        try:
            doc = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"cannot parse {path}: {exc}") from None
        if doc is not None:
            if not isinstance(doc, dict):
                raise ConfigError("<root>", "expected a mapping")
            _deep_update(layers, doc)
    for p, value in (overrides or {}).items():
        if value is not None:
            _deep_update(layers, _nested(p, value))
    return validate(_merge(RunConfig(), layers))
