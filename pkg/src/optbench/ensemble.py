"""Classifier fusion rules and metrics for imbalanced classification.

Classifiers are represented by their probability outputs: an N x C matrix,
one distribution per sample. Fusion combines several such matrices; metrics
reduce one matrix plus true labels to accuracy, class-frequency-weighted
F-score, and class-frequency-weighted G-mean, all derived from the
confusion matrix of argmax predictions (ties broken toward the lowest
class index, so results never depend on sample order).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ProbabilityMatrix",
    "ConfusionMatrix",
    "fuse_average",
    "fuse_weighted_sum",
    "confusion",
    "accuracy",
    "weighted_f_score",
    "weighted_g_mean",
    "probs_to_csv",
    "probs_from_csv",
]

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ProbabilityMatrix:
    """N x C matrix; every row is a probability distribution."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", arr)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("probability matrix must be 2-D and nonempty")
        if np.any(arr < 0.0):
            raise ValueError("probabilities must be nonnegative")
        sums = arr.sum(axis=1)
        off = np.abs(sums - 1.0)
        if np.any(off > ROW_SUM_TOL):
            bad = int(np.argmax(off))
            raise ValueError(f"row {bad} sums to {sums[bad]!r}, expected 1 within {ROW_SUM_TOL}")

    @property
    def n_samples(self) -> int:
        return self.probs.shape[0]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[1]

    def predictions(self) -> np.ndarray:
        return np.argmax(self.probs, axis=1)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """C x C counts; rows are true classes, columns predicted classes."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", arr)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("confusion matrix must be square")
        if np.any(arr < 0):
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def _one_vs_all(self, cls: int) -> tuple[int, int, int, int]:
        tp = int(self.counts[cls, cls])
        fn = int(self.counts[cls].sum()) - tp
        fp = int(self.counts[:, cls].sum()) - tp
        tn = self.total - tp - fn - fp
        return tp, fp, fn, tn

    def weighted_f_score(self) -> float:
        """Class-frequency-weighted one-vs-all F1; empty classes weigh zero."""
        total = self.total
        out = 0.0
        for cls in range(self.counts.shape[0]):
            n_cls = int(self.counts[cls].sum())
            if n_cls == 0:
                continue
            tp, fp, fn, _ = self._one_vs_all(cls)
            prec = tp / (tp + fp) if tp + fp > 0 else 0.0
            rec = tp / (tp + fn) if tp + fn > 0 else 0.0
            f1 = 2.0 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
            out += (n_cls / total) * f1
        return out

    def weighted_g_mean(self) -> float:
        """Class-frequency-weighted one-vs-all sqrt(sensitivity * specificity)."""
        total = self.total
        out = 0.0
        for cls in range(self.counts.shape[0]):
            n_cls = int(self.counts[cls].sum())
            if n_cls == 0:
                continue
            tp, fp, fn, tn = self._one_vs_all(cls)
            sens = tp / (tp + fn) if tp + fn > 0 else 0.0
            spec = tn / (tn + fp) if tn + fp > 0 else 0.0
            out += (n_cls / total) * math.sqrt(sens * spec)
        return out


def _check_members(members: list[ProbabilityMatrix]) -> tuple[int, int]:
    if not members:
        raise ValueError("need at least one member to fuse")
    n, c = members[0].probs.shape
    for i, pm in enumerate(members[1:], start=1):
        if pm.probs.shape != (n, c):
            raise ValueError(f"member {i} has shape {pm.probs.shape}, expected {(n, c)}")
    return n, c


def fuse_average(members: list[ProbabilityMatrix]) -> ProbabilityMatrix:
    """Element-wise arithmetic mean of the members' probabilities.

    Accumulated as first + mean(deviations from first) so that fusing
    identical members reproduces them bit for bit.
    """
    _check_members(members)
    base = members[0].probs
    dev = np.zeros_like(base)
    for pm in members[1:]:
        dev += pm.probs - base
    return ProbabilityMatrix(base + dev / len(members))


def fuse_weighted_sum(members: list[ProbabilityMatrix], weights: list[float]) -> ProbabilityMatrix:
    """Convex combination of the members with normalized nonnegative weights."""
    _check_members(members)
    if len(weights) != len(members):
        raise ValueError(f"{len(weights)} weights for {len(members)} members")
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = float(w.sum())
    if total == 0.0:
        raise ValueError("weights must not all be zero")
    out = np.zeros_like(members[0].probs)
    for wi, pm in zip(w, members):
        out += (wi / total) * pm.probs
    return ProbabilityMatrix(out)


def _check_labels(pm: ProbabilityMatrix, labels) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (pm.n_samples,):
        raise ValueError("labels must have one entry per row")
    if y.min() < 0 or y.max() >= pm.n_classes:
        raise ValueError("label out of range")
    return y


def confusion(pm: ProbabilityMatrix, labels) -> ConfusionMatrix:
    y = _check_labels(pm, labels)
    preds = pm.predictions()
    c = pm.n_classes
    counts = np.zeros((c, c), dtype=np.int64)
    np.add.at(counts, (y, preds), 1)
    return ConfusionMatrix(counts)


def accuracy(pm: ProbabilityMatrix, labels) -> float:
    return confusion(pm, labels).accuracy()


def weighted_f_score(pm: ProbabilityMatrix, labels) -> float:
    return confusion(pm, labels).weighted_f_score()


def weighted_g_mean(pm: ProbabilityMatrix, labels) -> float:
    return confusion(pm, labels).weighted_g_mean()


def probs_to_csv(pm: ProbabilityMatrix, path) -> None:
    """Write with header c0..cC-1, one row per sample, 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"c{j}" for j in range(pm.n_classes)])
        for row in pm.probs:
            writer.writerow([f"{v:.17g}" for v in row])


def probs_from_csv(path) -> ProbabilityMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or any(h != f"c{j}" for j, h in enumerate(header)):
            raise ValueError("expected header c0..cC-1")
        rows = [[float(v) for v in rec] for rec in reader]
    return ProbabilityMatrix(np.asarray(rows))
