"""Confusion matrix, per-class report, table rendering, latency measurement."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import asdict, dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import EmptyInput, LabelOutOfRange, LengthMismatch


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # counts[gold, pred]

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(golds: Sequence[int], preds: Sequence[int], num_classes: int) -> ConfusionMatrix:
    if len(golds) != len(preds):
        raise LengthMismatch(f"{len(golds)} gold labels vs {len(preds)} predictions")
    g = np.asarray(golds, dtype=np.int64).reshape(-1)
    p = np.asarray(preds, dtype=np.int64).reshape(-1)
    for arr in (g, p):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise LabelOutOfRange(f"labels must lie in [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (g, p), 1)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    per_class: tuple[ClassMetrics, ...]
    accuracy: float
    macro_avg: tuple[float, float, float]
    weighted_avg: tuple[float, float, float]
    total_support: int

    @property
    def f1_scores(self) -> list[float]:
        return [c.f1 for c in self.per_class]

    def to_dict(self, label_names: Optional[Sequence[str]] = None) -> dict:
        names = _names(len(self.per_class), label_names)
        return {
            "per_class": [dict(label=n, **asdict(c)) for n, c in zip(names, self.per_class)],
            "accuracy": self.accuracy,
            "macro_avg": dict(zip(("precision", "recall", "f1"), self.macro_avg)),
            "weighted_avg": dict(zip(("precision", "recall", "f1"), self.weighted_avg)),
            "total_support": self.total_support,
        }


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def report(cm: ConfusionMatrix) -> ClassificationReport:
    counts = cm.counts
    diag = np.diag(counts).astype(np.float64)
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    total = int(counts.sum())

    per_class = []
    for c in range(cm.num_classes):
        p = _ratio(float(diag[c]), int(col[c]))
        r = _ratio(float(diag[c]), int(row[c]))
        f = _ratio(2 * p * r, p + r)
        per_class.append(ClassMetrics(p, r, f, int(row[c])))

    columns = np.array([[m.precision, m.recall, m.f1] for m in per_class]).reshape(-1, 3)
    macro = columns.mean(axis=0) if len(per_class) else np.zeros(3)
    weights = row.astype(np.float64)
    weighted = (weights @ columns) / total if total else np.zeros(3)
    return ClassificationReport(
        per_class=tuple(per_class),
        accuracy=_ratio(float(diag.sum()), total),
        macro_avg=tuple(float(v) for v in macro),
        weighted_avg=tuple(float(v) for v in weighted),
        total_support=total,
    )


def round3(value: float) -> str:
    """Three decimals, halves rounded away from zero (on the shortest repr)."""
    return str(Decimal(repr(float(value))).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def _names(k: int, label_names: Optional[Sequence[str]]) -> list[str]:
    return [str(i) for i in range(k)] if label_names is None else [str(n) for n in label_names]


_HEADER = ("class", "precision", "recall", "f1-score", "support")


def render_report(r: ClassificationReport, label_names: Optional[Sequence[str]] = None) -> str:
    names = _names(len(r.per_class), label_names)
    rows = [_HEADER]
    for name, m in zip(names, r.per_class):
        rows.append((name, round3(m.precision), round3(m.recall), round3(m.f1), str(m.support)))
    acc = round3(r.accuracy)
    summary = [
        ("accuracy", acc, acc, acc, str(r.total_support)),
        ("macro avg", *(round3(v) for v in r.macro_avg), str(r.total_support)),
        ("weighted avg", *(round3(v) for v in r.weighted_avg), str(r.total_support)),
    ]
    width = max(len(row[0]) for row in rows + summary)
    fmt = "{:>%d}  {:>9}  {:>9}  {:>9}  {:>9}" % width
    lines = [fmt.format(*row) for row in rows]
    lines.append("")
    lines.extend(fmt.format(*row) for row in summary)
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    """Read a rendered table back into ``{row_name: (p, r, f1, support)}``."""
    out = {}
    for line in text.splitlines():
        parts = line.split()
        if len(parts) < 5 or parts[-4] == "precision":
            continue
        name = " ".join(parts[:-4])
        p, r, f = (float(v) for v in parts[-4:-1])
        out[name] = (p, r, f, int(parts[-1]))
    return out


def report_csv(r: ClassificationReport, label_names: Optional[Sequence[str]] = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class", "precision", "recall", "f1", "support"])
    for name, m in zip(_names(len(r.per_class), label_names), r.per_class):
        writer.writerow([name, repr(m.precision), repr(m.recall), repr(m.f1), m.support])
    return buf.getvalue()


@dataclass(frozen=True)
class LatencyStats:
    median_ms: float
    p95_ms: float
    total_ms: float
    per_item_ms: float
    item_count: int


def bench_latency(
    predict: Callable[[object], object],
    docs: Sequence,
    warmup: int = 3,
    repeats: int = 10,
) -> LatencyStats:
    """Time whole passes over ``docs``; median and p95 are over pass totals."""
    if not docs:
        raise EmptyInput("bench_latency needs at least one document")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    for _ in range(warmup):
        for d in docs:
            predict(d)
    passes = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for d in docs:
            predict(d)
        passes.append((time.perf_counter() - t0) * 1000.0)
    arr = np.array(passes)
    median = float(np.median(arr))
    return LatencyStats(
        median_ms=median,
        p95_ms=float(np.percentile(arr, 95)),
        total_ms=float(arr.sum()),
        per_item_ms=median / len(docs),
        item_count=len(docs),
    )


def item_latency(predict: Callable[[object], object], docs: Sequence, warmup: int = 3) -> LatencyStats:
    """Time each call separately; median and p95 are over single-document calls."""
    if not docs:
        raise EmptyInput("item_latency needs at least one document")
    for d in docs[:warmup]:
        predict(d)
    times = []
    for d in docs:
        t0 = time.perf_counter()
        predict(d)
        times.append((time.perf_counter() - t0) * 1000.0)
    arr = np.array(times)
    return LatencyStats(
        median_ms=float(np.median(arr)),
        p95_ms=float(np.percentile(arr, 95)),
        total_ms=float(arr.sum()),
        per_item_ms=float(arr.mean()),
        item_count=len(docs),
    )
