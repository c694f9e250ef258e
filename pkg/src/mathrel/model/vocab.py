"""Word-level vocabulary and fixed-length encoding."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from ..data import EmptyCorpus
from ..preprocess import preprocess_pipeline

PAD, UNK, CLS, MASK = 0, 1, 2, 3
RESERVED = ("[PAD]", "[UNK]", "[CLS]", "[MASK]")


class Vocab:
    """Token <-> id map with the four reserved ids first."""

    def __init__(self, tokens: Sequence[str]):
        if tuple(tokens[: len(RESERVED)]) != RESERVED:
            raise ValueError("vocabulary must start with the reserved tokens")
        self.tokens: list[str] = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate token in vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.tokens == other.tokens

    def __repr__(self) -> str:
        return f"Vocab(size={len(self)})"

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self.index.get(token, UNK)


@dataclass(frozen=True)
class EncodedInput:
    ids: np.ndarray
    attention_mask: np.ndarray
    segment_ids: np.ndarray


def build_vocab(train_corpus, preprocess: Callable = preprocess_pipeline) -> Vocab:
    """Reserved tokens, then training tokens by (frequency desc, token asc)."""
    texts = train_corpus.texts if hasattr(train_corpus, "texts") else list(train_corpus)
    if not texts:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    for text in texts:
        counts.update(preprocess(text).tokens)
    ordered = sorted(counts, key=lambda t: (-counts[t], t))
    return Vocab(list(RESERVED) + [t for t in ordered if t not in RESERVED])


def encode_tokens(tokens: Iterable[str], vocab: Vocab, max_len: int) -> EncodedInput:
    ids = np.full(max_len, PAD, dtype=np.int64)
    body = [vocab.id(t) for t in tokens][: max_len - 1]
    ids[0] = CLS
    ids[1 : 1 + len(body)] = body
    mask = np.zeros(max_len, dtype=np.int64)
    mask[: 1 + len(body)] = 1
    return EncodedInput(ids, mask, np.zeros(max_len, dtype=np.int64))


def encode(text: str, vocab: Vocab, max_len: int, preprocess: Callable = preprocess_pipeline) -> EncodedInput:
    """``[CLS]`` + token ids, truncated to ``max_len`` and right-padded."""
    return encode_tokens(preprocess(text).tokens, vocab, max_len)


def stack(batch: Sequence[EncodedInput]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack encodings into arrays, trimming columns that are padding everywhere."""
    ids = np.stack([e.ids for e in batch])
    mask = np.stack([e.attention_mask for e in batch])
    seg = np.stack([e.segment_ids for e in batch])
    width = max(int(mask.sum(axis=1).max()), 1)
    return ids[:, :width], mask[:, :width], seg[:, :width]
