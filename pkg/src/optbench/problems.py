"""Small differentiable training problems with hand-derived gradients.

Each Problem bundles named parameter shapes with eval/grad callables over an
optional batch of row indices (None means the full data). Gradients are
analytic and checked against central finite differences, which is why the
MLP's hidden nonlinearity is tanh: a smooth activation keeps the
finite-difference comparison clean everywhere.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .tensor import Tensor, tensor

__all__ = [
    "Problem",
    "Dataset",
    "quadratic_problem",
    "rosenbrock_problem",
    "synth_blobs",
    "softmax_xent",
    "logreg_problem",
    "mlp_problem",
    "finite_diff_check",
    "dataset_to_csv",
    "dataset_from_csv",
]

Params = dict[str, Tensor]
Batch = "np.ndarray | list[int] | None"


@dataclass(frozen=True)
class Problem:
    """A named objective: loss and analytic gradient over named parameters.

    eval(params, batch) -> float and grad(params, batch) -> named tensors
    shaped like param_shapes. start, when set, is the canonical initial
    point; predict_proba (classification problems only) maps features to
    per-class probabilities. n_examples drives mini-batching (1 for pure
    functions of the parameters).
    """

    name: str
    param_shapes: dict[str, tuple[int, ...]]
    eval: Callable[[Params, Batch], float]
    grad: Callable[[Params, Batch], Params]
    known_optimum: tuple[dict[str, list[float]], float] | None = None
    start: Params | None = None
    predict_proba: Callable[[Params, np.ndarray], np.ndarray] | None = None
    n_examples: int = 1


@dataclass
class Dataset:
    """Feature matrix with integer class labels and per-class counts."""

    features: np.ndarray
    labels: np.ndarray
    class_counts: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must have one entry per feature row")
        if self.class_counts is None:
            n_classes = int(self.labels.max()) + 1 if self.labels.size else 0
            self.class_counts = np.bincount(self.labels, minlength=n_classes)
        self.class_counts = np.asarray(self.class_counts, dtype=np.int64)
        if self.labels.size and self.labels.max() >= len(self.class_counts):
            raise ValueError("label out of range for class_counts")
        if self.labels.min(initial=0) < 0:
            raise ValueError("labels must be nonnegative")
        if int(self.class_counts.sum()) != len(self.labels):
            raise ValueError("class_counts must sum to the number of samples")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_classes(self) -> int:
        return len(self.class_counts)


def quadratic_problem(dim: int, condition: float) -> Problem:
    """0.5 * sum(a_i * x_i**2) with coefficients log-spaced in [1, condition]."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if condition < 1:
        raise ValueError("condition must be >= 1")
    if dim == 1:
        coeffs = np.ones(1)
    else:
        coeffs = np.logspace(0.0, np.log10(condition), dim)

    def _eval(params: Params, batch: Batch = None) -> float:
        x = params["x"].data
        return float(0.5 * np.sum(coeffs * x * x))

    def _grad(params: Params, batch: Batch = None) -> Params:
        x = params["x"].data
        return {"x": tensor(coeffs * x)}

    # Canonical start 0.01*ones keeps |grad| <= 1 even at condition 100, the
    # regime where the delta-modulated variants are well behaved; a squared-
    # gradient running average diverges from gradients of size >> 1, which
    # collapses the exp-curve modulators and freezes those coordinates.
    return Problem(
        name=f"quadratic(dim={dim}, condition={condition:g})",
        param_shapes={"x": (dim,)},
        eval=_eval,
        grad=_grad,
        known_optimum=({"x": [0.0] * dim}, 0.0),
        start={"x": tensor(np.full(dim, 0.01))},
    )


def rosenbrock_problem() -> Problem:
    """(1-x)**2 + 100*(y-x**2)**2 with the classic start (-1.2, 1)."""

    def _eval(params: Params, batch: Batch = None) -> float:
        x, y = params["xy"].data
        return float((1.0 - x) ** 2 + 100.0 * (y - x * x) ** 2)

    def _grad(params: Params, batch: Batch = None) -> Params:
        x, y = params["xy"].data
        dx = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x)
        dy = 200.0 * (y - x * x)
        return {"xy": tensor([dx, dy])}

    return Problem(
        name="rosenbrock",
        param_shapes={"xy": (2,)},
        eval=_eval,
        grad=_grad,
        known_optimum=({"xy": [1.0, 1.0]}, 0.0),
        start={"xy": tensor([-1.2, 1.0])},
    )


def synth_blobs(
    n_per_class: list[int], centers: list[list[float]], sigma: float, seed: int
) -> Dataset:
    """Gaussian clusters, one per class; pure function of its arguments."""
    if not centers:
        raise ValueError("need at least one center")
    if len(n_per_class) != len(centers):
        raise ValueError("n_per_class and centers must have the same length")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    rng = np.random.default_rng(seed)
    centers_arr = np.asarray(centers, dtype=np.float64)
    rows, labels = [], []
    for cls, (n, center) in enumerate(zip(n_per_class, centers_arr)):
        rows.append(center + sigma * rng.standard_normal((n, centers_arr.shape[1])))
        labels.extend([cls] * n)
    return Dataset(
        features=np.concatenate(rows, axis=0),
        labels=np.asarray(labels, dtype=np.int64),
        class_counts=np.asarray(n_per_class, dtype=np.int64),
    )


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_xent(logits: Tensor, labels) -> tuple[float, Tensor]:
    """Mean cross-entropy over rows plus its gradient w.r.t. the logits.

    Row-max subtraction keeps huge logits finite; the gradient is
    (softmax - onehot)/N so each gradient row sums to zero.
    """
    arr = logits.as_array()
    y = np.asarray(labels, dtype=np.int64)
    n, c = arr.shape
    if y.shape != (n,):
        raise ValueError("labels must have one entry per logit row")
    if y.size and (y.min() < 0 or y.max() >= c):
        raise ValueError("label out of range")
    probs = _softmax_rows(arr)
    # log-softmax recomputed from the shifted logits for stability
    shifted = arr - arr.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(-np.mean(log_probs[np.arange(n), y]))
    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    return loss, tensor(dlogits)


def _resolve_batch(n: int, batch: Batch) -> np.ndarray:
    if batch is None:
        return np.arange(n)
    idx = np.asarray(batch, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("empty batch")
    return idx


def logreg_problem(data: Dataset) -> Problem:
    """Multinomial logistic regression on `data`: params w (D, C) and b (C,)."""
    if data.n_samples == 0:
        raise ValueError("dataset is empty")
    x_all, y_all = data.features, data.labels
    d, c = x_all.shape[1], data.n_classes

    def _logits(params: Params, xb: np.ndarray) -> np.ndarray:
        w = params["w"].as_array()
        b = params["b"].data
        return xb @ w + b

    def _eval(params: Params, batch: Batch = None) -> float:
        idx = _resolve_batch(data.n_samples, batch)
        loss, _ = softmax_xent(tensor(_logits(params, x_all[idx])), y_all[idx])
        return loss

    def _grad(params: Params, batch: Batch = None) -> Params:
        idx = _resolve_batch(data.n_samples, batch)
        xb, yb = x_all[idx], y_all[idx]
        _, dlogits = softmax_xent(tensor(_logits(params, xb)), yb)
        dl = dlogits.as_array()
        return {"w": tensor(xb.T @ dl), "b": tensor(dl.sum(axis=0))}

    def _proba(params: Params, features: np.ndarray) -> np.ndarray:
        return _softmax_rows(_logits(params, np.asarray(features, dtype=np.float64)))

    return Problem(
        name="logreg",
        param_shapes={"w": (d, c), "b": (c,)},
        eval=_eval,
        grad=_grad,
        predict_proba=_proba,
        n_examples=data.n_samples,
    )


def mlp_problem(data: Dataset, hidden: int) -> Problem:
    """One-hidden-layer tanh MLP with manual backprop."""
    if data.n_samples == 0:
        raise ValueError("dataset is empty")
    if hidden < 1:
        raise ValueError("hidden must be >= 1")
    x_all, y_all = data.features, data.labels
    d, c = x_all.shape[1], data.n_classes

    def _forward(params: Params, xb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w1 = params["w1"].as_array()
        b1 = params["b1"].data
        w2 = params["w2"].as_array()
        b2 = params["b2"].data
        a = np.tanh(xb @ w1 + b1)
        return a, a @ w2 + b2

    def _eval(params: Params, batch: Batch = None) -> float:
        idx = _resolve_batch(data.n_samples, batch)
        _, logits = _forward(params, x_all[idx])
        loss, _ = softmax_xent(tensor(logits), y_all[idx])
        return loss

    def _grad(params: Params, batch: Batch = None) -> Params:
        idx = _resolve_batch(data.n_samples, batch)
        xb, yb = x_all[idx], y_all[idx]
        a, logits = _forward(params, xb)
        _, dlogits = softmax_xent(tensor(logits), yb)
        dl = dlogits.as_array()
        w2 = params["w2"].as_array()
        da = dl @ w2.T
        dz = da * (1.0 - a * a)  # tanh'(z) = 1 - tanh(z)**2
        return {
            "w1": tensor(xb.T @ dz),
            "b1": tensor(dz.sum(axis=0)),
            "w2": tensor(a.T @ dl),
            "b2": tensor(dl.sum(axis=0)),
        }

    def _proba(params: Params, features: np.ndarray) -> np.ndarray:
        _, logits = _forward(params, np.asarray(features, dtype=np.float64))
        return _softmax_rows(logits)

    return Problem(
        name=f"mlp(hidden={hidden})",
        param_shapes={"w1": (d, hidden), "b1": (hidden,), "w2": (hidden, c), "b2": (c,)},
        eval=_eval,
        grad=_grad,
        predict_proba=_proba,
        n_examples=data.n_samples,
    )


def finite_diff_check(problem: Problem, params: Params, batch: Batch, h: float) -> float:
    """Max relative error between analytic and central-difference gradients.

    The relative denominator is max(|analytic|, |numeric|, 1e-8) per
    coordinate so near-zero gradients cannot blow up the ratio.
    """
    if not h > 0:
        raise ValueError("h must be > 0")
    analytic = problem.grad(params, batch)
    worst = 0.0
    for name, theta in params.items():
        a = analytic[name].data
        for i in range(theta.size):
            bumped = theta.data.copy()
            bumped[i] += h
            hi = problem.eval({**params, name: Tensor(theta.shape, bumped)}, batch)
            bumped = theta.data.copy()
            bumped[i] -= h
            lo = problem.eval({**params, name: Tensor(theta.shape, bumped)}, batch)
            numeric = (hi - lo) / (2.0 * h)
            denom = max(abs(numeric), abs(a[i]), 1e-8)
            worst = max(worst, abs(numeric - a[i]) / denom)
    return worst


def dataset_to_csv(data: Dataset, path) -> None:
    """Write features and labels with header f0..fD-1,label; 17 significant digits."""
    d = data.features.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f{j}" for j in range(d)] + ["label"])
        for row, label in zip(data.features, data.labels):
            writer.writerow([f"{v:.17g}" for v in row] + [str(int(label))])


def dataset_from_csv(path) -> Dataset:
    """Read a dataset written by dataset_to_csv; classes inferred from labels."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[-1] != "label":
            raise ValueError("expected header ending in 'label'")
        rows, labels = [], []
        for rec in reader:
            rows.append([float(v) for v in rec[:-1]])
            labels.append(int(rec[-1]))
    return Dataset(features=np.asarray(rows), labels=np.asarray(labels))
