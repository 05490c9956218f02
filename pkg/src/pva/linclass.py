"""Multinomial logistic regression on sparse TF-IDF vectors, trained with SGD."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, TrainingError
from .textproc import SparseVector

# fold the lazy L2 scale back into the weights before it underflows
_MIN_SCALE = 1e-6


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def rank(probs: np.ndarray, top_k: int | None = None) -> list[tuple[int, float]]:
    """Indices by descending probability; ties go to the lower index."""
    order = np.argsort(-probs, kind="stable")
    if top_k is not None:
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        order = order[:top_k]
    return [(int(i), float(probs[i])) for i in order]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    lr0: float = 0.5
    l2: float = 1e-6
    seed: int = 42
    batch_size: int = 1

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be > 0")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr0 * self.l2 >= 1:
            raise ValueError("lr0 * l2 must be < 1 for the weight decay to stay positive")


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray  # K x D
    biases: np.ndarray  # K
    label_names: tuple[str, ...]
    vocab_fingerprint: str = ""
    config: dict | None = None

    kind = "linear"

    def __post_init__(self) -> None:
        k = len(self.label_names)
        if k < 2:
            raise ValueError("a linear model needs at least two classes")
        if self.weights.ndim != 2 or self.weights.shape[0] != k or self.biases.shape != (k,):
            raise DimensionMismatch(
                f"weights {self.weights.shape} / biases {self.biases.shape} do not fit {k} classes"
            )

    @classmethod
    def zeros(cls, label_names: Sequence[str], num_features: int, **kw) -> "LinearModel":
        k = len(label_names)
        return cls(np.zeros((k, num_features)), np.zeros(k), tuple(label_names), **kw)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def num_features(self) -> int:
        return self.weights.shape[1]

    def logits(self, x: SparseVector) -> np.ndarray:
        w = self.weights[:, x.indices].astype(np.float64)
        return w @ x.values + self.biases.astype(np.float64)

    def probabilities(self, x: SparseVector) -> np.ndarray:
        return softmax(self.logits(x))

    def narrowed(self) -> "LinearModel":
        """Copy holding the float32 values the model file stores."""
        return replace(
            self,
            weights=self.weights.astype(np.float32),
            biases=self.biases.astype(np.float32),
        )


def predict_linear(model: LinearModel, x: SparseVector, top_k: int = 1) -> list[tuple[int, float]]:
    return rank(model.probabilities(x), top_k)


def loss_and_gradient(
    model: LinearModel,
    batch: Sequence[tuple[SparseVector, int]],
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy plus (l2/2)*||W||^2 with dense gradients ``(loss, dW, db)``.

    The bias is not penalised.
    """
    if not batch:
        raise ValueError("batch must be nonempty")
    w = model.weights.astype(np.float64)
    b = model.biases.astype(np.float64)
    grad_w = np.zeros_like(w)
    grad_b = np.zeros_like(b)
    loss = 0.0
    for x, y in batch:
        z = w[:, x.indices] @ x.values + b
        shifted = z - z.max()
        log_norm = math.log(np.exp(shifted).sum())
        loss -= shifted[y] - log_norm
        p = np.exp(shifted - log_norm)
        p[y] -= 1.0
        grad_w[:, x.indices] += np.outer(p, x.values)
        grad_b += p
    n = len(batch)
    loss = loss / n + 0.5 * l2 * float(np.sum(w * w))
    grad_w = grad_w / n + l2 * w
    grad_b /= n
    return loss, grad_w, grad_b


def dataset_loss(model: LinearModel, X: Sequence[SparseVector], y: Sequence[int], l2: float) -> float:
    return loss_and_gradient(model, list(zip(X, y)), l2)[0]


def train_logreg(
    X: Sequence[SparseVector],
    y: Sequence[int],
    config: TrainConfig,
    *,
    num_features: int,
    label_names: Sequence[str],
    vocab_fingerprint: str = "",
    on_epoch: Optional[Callable[[int, LinearModel], None]] = None,
) -> LinearModel:
    """Plain SGD from a zero start.

    Examples are reshuffled every epoch by a generator seeded from
    ``config.seed`` and the step size decays linearly from ``lr0`` to zero
    over all updates.  The L2 decay is kept as a global scale on the weight
    matrix so each update only touches the example's nonzero columns.
    ``on_epoch(epoch, snapshot)`` is called after every epoch.
    """
    if len(X) != len(y):
        raise DimensionMismatch(f"{len(X)} vectors but {len(y)} labels")
    if not X:
        raise DimensionMismatch("empty training set")
    k = len(label_names)
    labels = np.asarray(y, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= k:
        raise DimensionMismatch("label index outside the label set")
    for x in X:
        if len(x) and x.indices[-1] >= num_features:
            raise DimensionMismatch("feature index beyond num_features")

    # D x K so one example's rows are contiguous
    wt = np.zeros((num_features, k))
    b = np.zeros(k)
    scale = 1.0
    n = len(X)
    bs = config.batch_size
    steps_per_epoch = -(-n // bs)
    total_steps = config.epochs * steps_per_epoch
    rng = np.random.default_rng(config.seed)

    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            lr = config.lr0 * (1.0 - step / total_steps)
            step += 1
            chunk = order[start:start + bs]
            grads = []
            for i in chunk.tolist():
                x = X[i]
                z = scale * (x.values @ wt[x.indices]) + b
                p = softmax(z)
                p[labels[i]] -= 1.0
                grads.append((x, p))
            scale *= 1.0 - lr * config.l2
            step_size = lr / len(chunk)
            for x, p in grads:
                wt[x.indices] -= (step_size / scale) * np.outer(x.values, p)
                b -= step_size * p
            if scale < _MIN_SCALE:
                wt *= scale
                scale = 1.0
        if on_epoch is not None:
            on_epoch(epoch, LinearModel(np.ascontiguousarray((wt * scale).T), b.copy(), tuple(label_names)))

    wt *= scale
    weights = np.ascontiguousarray(wt.T)
    if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(b))):
        raise TrainingError("training diverged (non-finite parameters)")
    return LinearModel(
        weights=weights,
        biases=b,
        label_names=tuple(label_names),
        vocab_fingerprint=vocab_fingerprint,
        config={
            "epochs": config.epochs,
            "lr0": config.lr0,
            "l2": config.l2,
            "seed": config.seed,
            "batch_size": config.batch_size,
        },
    )
