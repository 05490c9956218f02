"""Text to features: tokens, vocabulary with document frequencies, TF-IDF, hashed n-grams."""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyVocabulary

# alphanumeric runs: word characters minus the underscore
_TOKEN_RE = re.compile(r"[^\W_]+")

NGRAM_SEP = "\x1f"

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def tokenize(text: str, stopwords: Optional[frozenset[str]] = None) -> list[str]:
    tokens = [t for t in _TOKEN_RE.findall(text.lower()) if len(t) > 1]
    if stopwords:
        tokens = [t for t in tokens if t not in stopwords]
    return tokens


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a one-token-per-line UTF-8 list; ``None`` gives the bundled English list."""
    if path is None:
        text = resources.files("pva").joinpath("data/stopwords_en.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(line.strip().lower() for line in text.splitlines() if line.strip())


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    doc_frequency: np.ndarray
    num_documents: int
    token_to_index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "token_to_index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return (
            self.tokens == other.tokens
            and self.num_documents == other.num_documents
            and np.array_equal(self.doc_frequency, other.doc_frequency)
        )

    def idf(self) -> np.ndarray:
        """Smoothed inverse document frequency, ln((1+N)/(1+df)) + 1."""
        df = self.doc_frequency.astype(np.float64)
        return np.log((1.0 + self.num_documents) / (1.0 + df)) + 1.0

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.num_documents).encode())
        for tok, df in zip(self.tokens, self.doc_frequency.tolist()):
            h.update(b"\x00")
            h.update(tok.encode("utf-8"))
            h.update(b"\x01")
            h.update(str(df).encode())
        return h.hexdigest()[:32]


def build_vocab(
    token_lists: Iterable[Sequence[str]],
    min_df: int = 1,
    max_df_ratio: float = 1.0,
    max_features: Optional[int] = None,
) -> tuple[Vocabulary, np.ndarray]:
    """Count document frequencies, filter, and return ``(vocab, idf)``.

    Kept tokens are indexed in lexicographic order.  With ``max_features``
    the most frequent tokens by total count survive, ties going to the
    lexicographically smaller token.
    """
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    if not 0.0 < max_df_ratio <= 1.0:
        raise ValueError("max_df_ratio must be in (0, 1]")

    df: Counter[str] = Counter()
    total: Counter[str] = Counter()
    n_docs = 0
    for tokens in token_lists:
        n_docs += 1
        total.update(tokens)
        df.update(set(tokens))

    max_df = max_df_ratio * n_docs
    kept = [t for t, c in df.items() if min_df <= c <= max_df]
    if max_features is not None and len(kept) > max_features:
        kept.sort(key=lambda t: (-total[t], t))
        kept = kept[:max_features]
    if not kept:
        raise EmptyVocabulary("every token was filtered out")
    kept.sort()

    vocab = Vocabulary(
        tokens=tuple(kept),
        doc_frequency=np.array([df[t] for t in kept], dtype=np.int64),
        num_documents=n_docs,
    )
    return vocab, vocab.idf()


@dataclass(frozen=True)
class SparseVector:
    """Sorted-index sparse vector; ``indices`` strictly increasing."""

    indices: np.ndarray
    values: np.ndarray

    @classmethod
    def empty(cls) -> "SparseVector":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.indices)

    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def to_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim, dtype=np.float64)
        out[self.indices] = self.values
        return out


def tfidf_vector(tokens: Sequence[str], vocab: Vocabulary, idf: np.ndarray) -> SparseVector:
    lookup = vocab.token_to_index
    counts = Counter(lookup[t] for t in tokens if t in lookup)
    if not counts:
        return SparseVector.empty()
    idx = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in idx.tolist()], dtype=np.float64) * idf[idx]
    values /= np.sqrt(np.dot(values, values))
    return SparseVector(idx, values)


def word_ngrams(tokens: Sequence[str], max_n: int) -> list[str]:
    """Contiguous n-grams for n = 2..max_n joined by U+001F."""
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    out = []
    for n in range(2, max_n + 1):
        for i in range(len(tokens) - n + 1):
            out.append(NGRAM_SEP.join(tokens[i:i + n]))
    return out


@lru_cache(maxsize=1 << 20)
def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV64_PRIME) & _MASK64
    return h


def hash_ngram(ngram: str, buckets: int) -> int:
    if buckets < 1:
        raise ValueError("buckets must be >= 1")
    return fnv1a_64(ngram.encode("utf-8")) % buckets

