"""JSON checkpoints: config, vocabulary and every weight tensor as shape + flat list.

Floats are written with ``repr`` of the float64 value, which round-trips
float32 weights exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .encoder import ModelConfig, ShapeError, check_parameters
from .vocab import Vocab

FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


class VersionError(ValueError):
    pass


def save_checkpoint(parameters, model_config: ModelConfig, vocab: Vocab, path) -> None:
    if len(vocab) != model_config.vocab_size:
        raise ValueError(f"vocabulary size {len(vocab)} does not match config {model_config.vocab_size}")
    check_parameters(parameters, model_config)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "format_version": FORMAT_VERSION,
        "config": model_config.to_dict(),
        "vocab": vocab.tokens,
        "dtype": str(next(iter(parameters.values())).dtype),
        "tensors": {
            name: {"shape": list(arr.shape), "data": [float(x) for x in arr.reshape(-1)]}
            for name, arr in sorted(parameters.items())
        },
    }
    path.write_text(json.dumps(doc, separators=(",", ":")), encoding="utf-8")


def load_checkpoint(path):
    """Return ``(parameters, config, vocab)``."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: not a readable checkpoint ({exc})") from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise FormatError(f"{path}: missing format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise VersionError(f"{path}: format_version {doc['format_version']!r}, expected {FORMAT_VERSION}")
    try:
        cfg = ModelConfig(**doc["config"])
        vocab = Vocab(doc["vocab"])
        dtype = np.dtype(doc.get("dtype", "float32"))
        params = {
            name: np.array(t["data"], dtype=dtype).reshape(t["shape"])
            for name, t in doc["tensors"].items()
        }
        check_parameters(params, cfg)
    except (KeyError, TypeError, ValueError, ShapeError) as exc:
        raise FormatError(f"{path}: malformed checkpoint ({exc})") from None
    if len(vocab) != cfg.vocab_size:
        raise FormatError(f"{path}: vocabulary size {len(vocab)} does not match config")
    return params, cfg, vocab
