"""Averaged word + hashed n-gram embeddings feeding a bias-free softmax layer.

Row layout of the input matrix: ``[0, V)`` vocabulary words, ``[V, V+B)``
hashed n-gram buckets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyVocabulary, TrainingError
from .linclass import rank, softmax
from .textproc import Vocabulary, hash_ngram, word_ngrams

_INIT_CHUNK_ROWS = 1 << 16


@dataclass(frozen=True)
class FtConfig:
    dim: int = 100
    epochs: int = 25
    lr0: float = 0.1
    max_n: int = 2
    buckets: int = 1 << 21
    seed: int = 42
    dtype: str = "float32"

    def __post_init__(self) -> None:
        if self.dim < 1 or self.buckets < 1 or self.max_n < 1:
            raise ValueError("dim, buckets and max_n must be >= 1")
        if self.epochs < 0 or self.lr0 <= 0:
            raise ValueError("need epochs >= 0 and lr0 > 0")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    def echo(self) -> dict:
        return {"dim": self.dim, "epochs": self.epochs, "lr0": self.lr0, "max_n": self.max_n,
                "buckets": self.buckets, "seed": self.seed}


@dataclass(frozen=True)
class EmbeddingModel:
    input_embeddings: np.ndarray  # (V + B) x dim
    output_weights: np.ndarray  # K x dim
    label_names: tuple[str, ...]
    vocab_size: int
    max_n: int
    buckets: int
    vocab_fingerprint: str = ""
    config: dict | None = None

    kind = "embedding"

    def __post_init__(self) -> None:
        rows, dim = self.input_embeddings.shape
        if rows != self.vocab_size + self.buckets:
            raise DimensionMismatch(f"{rows} input rows, expected {self.vocab_size} + {self.buckets}")
        if self.output_weights.shape != (len(self.label_names), dim):
            raise DimensionMismatch(f"output matrix {self.output_weights.shape} does not fit")

    @property
    def dim(self) -> int:
        return self.input_embeddings.shape[1]

    @property
    def num_classes(self) -> int:
        return self.output_weights.shape[0]

    def narrowed(self) -> "EmbeddingModel":
        return replace(
            self,
            input_embeddings=self.input_embeddings.astype(np.float32, copy=False),
            output_weights=self.output_weights.astype(np.float32, copy=False),
        )


def doc_feature_ids(tokens: Sequence[str], vocab: Vocabulary, max_n: int, buckets: int) -> np.ndarray:
    lookup = vocab.token_to_index
    v = len(vocab)
    ids = [lookup[t] for t in tokens if t in lookup]
    ids.extend(v + hash_ngram(g, buckets) for g in word_ngrams(tokens, max_n))
    return np.array(ids, dtype=np.int64)


def _compact(ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    uniq, counts = np.unique(ids, return_counts=True)
    return uniq, counts.astype(np.float64)


def embed_average(ids: np.ndarray, model: EmbeddingModel) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        return np.zeros(model.dim)
    uniq, counts = _compact(ids)
    rows = model.input_embeddings[uniq].astype(np.float64)
    return (counts @ rows) / ids.size


def ft_probabilities(model: EmbeddingModel, ids: np.ndarray) -> np.ndarray:
    hidden = embed_average(ids, model)
    return softmax(model.output_weights.astype(np.float64) @ hidden)


def predict_ft(
    model: EmbeddingModel, tokens: Sequence[str], vocab: Vocabulary, top_k: int = 1
) -> list[tuple[int, float]]:
    ids = doc_feature_ids(tokens, vocab, model.max_n, model.buckets)
    return rank(ft_probabilities(model, ids), top_k)


def loss_and_gradient_ft(
    model: EmbeddingModel, ids: np.ndarray, label: int
) -> tuple[float, np.ndarray, np.ndarray]:
    """Cross-entropy of one document with dense ``(d_input, d_output)`` gradients."""
    ids = np.asarray(ids, dtype=np.int64)
    hidden = embed_average(ids, model)
    w_out = model.output_weights.astype(np.float64)
    z = w_out @ hidden
    shifted = z - z.max()
    log_norm = math.log(np.exp(shifted).sum())
    loss = -(shifted[label] - log_norm)
    g = np.exp(shifted - log_norm)
    g[label] -= 1.0
    d_out = np.outer(g, hidden)
    d_in = np.zeros(model.input_embeddings.shape)
    if ids.size:
        np.add.at(d_in, ids, (w_out.T @ g) / ids.size)
    return loss, d_in, d_out


def _init_embeddings(rows: int, dim: int, dtype: np.dtype, rng: np.random.Generator) -> np.ndarray:
    bound = 1.0 / dim
    out = np.empty((rows, dim), dtype=dtype)
    for start in range(0, rows, _INIT_CHUNK_ROWS):
        stop = min(rows, start + _INIT_CHUNK_ROWS)
        out[start:stop] = rng.uniform(-bound, bound, size=(stop - start, dim))
    return out


def train_ft(
    docs: Sequence[Sequence[str]],
    labels: Sequence[int],
    vocab: Vocabulary,
    config: FtConfig,
    *,
    label_names: Sequence[str],
) -> EmbeddingModel:
    """Per-document SGD on softmax cross-entropy.

    Only the document's input rows and the output matrix change per step.
    The learning rate decays linearly from ``lr0`` to zero over
    ``epochs * len(docs)`` steps.  Documents with no features are skipped
    but still advance the schedule.
    """
    if not docs:
        raise DimensionMismatch("empty training corpus")
    if len(docs) != len(labels):
        raise DimensionMismatch(f"{len(docs)} documents but {len(labels)} labels")
    if len(vocab) == 0:
        raise EmptyVocabulary("empty vocabulary")
    k = len(label_names)
    y = np.asarray(labels, dtype=np.int64)
    if y.min() < 0 or y.max() >= k:
        raise DimensionMismatch("label index outside the label set")

    dtype = np.dtype(config.dtype)
    rng = np.random.default_rng(config.seed)
    w_in = _init_embeddings(len(vocab) + config.buckets, config.dim, dtype, rng)
    w_out = np.zeros((k, config.dim), dtype=dtype)

    features = [_compact(doc_feature_ids(d, vocab, config.max_n, config.buckets)) for d in docs]
    features = [(u, c.astype(dtype), float(c.sum())) for u, c in features]

    n = len(docs)
    total_steps = config.epochs * n
    step = 0
    for _ in range(config.epochs):
        for i in rng.permutation(n).tolist():
            lr = config.lr0 * (1.0 - step / total_steps)
            step += 1
            uniq, counts, n_ids = features[i]
            if n_ids == 0:
                continue
            rows = w_in[uniq]
            hidden = (counts @ rows) / dtype.type(n_ids)
            g = softmax(w_out @ hidden)
            g[y[i]] -= 1.0
            g = g.astype(dtype)
            grad_hidden = g @ w_out
            w_out -= dtype.type(lr) * np.outer(g, hidden)
            w_in[uniq] = rows - np.outer(counts * dtype.type(lr / n_ids), grad_hidden)

    if not (np.all(np.isfinite(w_out)) and np.all(np.isfinite(w_in))):
        raise TrainingError("training diverged (non-finite parameters)")
    return EmbeddingModel(
        input_embeddings=w_in,
        output_weights=w_out,
        label_names=tuple(label_names),
        vocab_size=len(vocab),
        max_n=config.max_n,
        buckets=config.buckets,
        vocab_fingerprint=vocab.fingerprint(),
        config=config.echo(),
    )
