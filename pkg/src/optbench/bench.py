"""Seeded training runs, ensemble fusion, and CSV emission.

Every source of randomness flows from numpy's PCG64 generator
(numpy.random.default_rng), so a config reproduces its results bit for bit:

  * dataset draws come from default_rng(seed) inside synth_blobs;
  * the train/test split uses default_rng([seed, 2]), shared by every run
    of an experiment so fused members score the same test rows;
  * run run_index draws its parameter init and epoch shuffles from
    default_rng([seed + run_index, 1]).

Wall-clock timing is opt-in (timing=True) because measured times would
break the byte-identical-output contract; with the default, wall_ms is 0.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .ensemble import ProbabilityMatrix, confusion, fuse_average, fuse_weighted_sum
from .optim import AVG_MODES, NORM_SCOPES, VARIANTS, Optimizer, OptimizerConfig
from .problems import Dataset, Problem, logreg_problem, mlp_problem, quadratic_problem, rosenbrock_problem, synth_blobs
from .tensor import Tensor, tensor

__all__ = [
    "TASKS",
    "ExperimentConfig",
    "RunRecord",
    "MemberResult",
    "FusionScores",
    "EnsembleReport",
    "DivergenceError",
    "run_training",
    "run_ensemble",
    "emit_csv",
    "format_report",
]

CSV_HEADER = ["run_id", "optimizer", "task", "seed", "epoch", "train_loss", "eval_accuracy", "wall_ms"]

# Imbalanced three-cluster classification task; the overlap is deliberate so
# single runs make some errors and fusion has something to average out.
_BLOBS_COUNTS = [120, 40, 20]
_BLOBS_CENTERS = [[0.0, 0.0], [2.4, 0.3], [1.0, 2.1]]
_BLOBS_SIGMA = 1.0

_SPLIT_STREAM = 2
_RUN_STREAM = 1

TASKS = ("quadratic", "rosenbrock", "blobs", "blobs-mlp")


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss; carries the records so far."""

    def __init__(self, run_id: int, variant: str, epoch: int, records: list):
        super().__init__(
            f"run {run_id} ({variant}) diverged to a non-finite loss at epoch {epoch}"
        )
        self.run_id = run_id
        self.variant = variant
        self.epoch = epoch
        self.records = records


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "blobs"
    optimizers: tuple[str, ...] = ("adam",)
    runs: int = 1
    epochs: int = 20
    batch_size: int = 30
    seed: int = 0
    lr: float = 0.001
    rho1: float = 0.9
    rho2: float = 0.999
    epsilon: float = 1e-8
    k: float = 4.0
    steps: int = 30
    norm_scope: str = "per_tensor"
    avg_mode: str = "squared_grad"
    out: str | None = None
    timing: bool = False

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if not self.optimizers:
            raise ValueError("need at least one optimizer")
        for v in self.optimizers:
            if v not in VARIANTS:
                raise ValueError(f"unknown optimizer {v!r}; expected one of {VARIANTS}")
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        # delegate hyperparameter range checks
        self.optimizer_config(self.optimizers[0])

    def optimizer_config(self, variant: str) -> OptimizerConfig:
        return OptimizerConfig(
            variant=variant,
            lr=self.lr,
            rho1=self.rho1,
            rho2=self.rho2,
            epsilon=self.epsilon,
            k=self.k,
            steps=self.steps,
            norm_scope=self.norm_scope,
            avg_mode=self.avg_mode,
        )

    @property
    def total_runs(self) -> int:
        return self.runs * len(self.optimizers)

    def variant_of_run(self, run_index: int) -> str:
        if not 0 <= run_index < self.total_runs:
            raise ValueError(f"run_index {run_index} out of range for {self.total_runs} runs")
        return self.optimizers[run_index // self.runs]


@dataclass(frozen=True)
class RunRecord:
    run_id: int
    optimizer: str
    task: str
    seed: int
    epoch: int
    train_loss: float
    eval_accuracy: float
    wall_ms: float


@dataclass(frozen=True)
class MemberResult:
    run_id: int
    optimizer: str
    seed: int
    accuracy: float
    f_score: float
    g_mean: float
    final_loss: float


@dataclass(frozen=True)
class FusionScores:
    accuracy: float
    f_score: float
    g_mean: float


@dataclass
class EnsembleReport:
    config: ExperimentConfig
    records: list[RunRecord] = field(default_factory=list)
    members: list[MemberResult] = field(default_factory=list)
    variant_fusions: dict[str, FusionScores] = field(default_factory=dict)
    combined_fusion: FusionScores | None = None
    weighted_fusion: FusionScores | None = None


@dataclass(frozen=True)
class _TaskData:
    problem: Problem
    classification: bool
    test_features: np.ndarray | None = None
    test_labels: np.ndarray | None = None


def _stratified_split(data: Dataset, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """80/20 split with per-class proportions preserved; deterministic in seed."""
    rng = np.random.default_rng([seed, _SPLIT_STREAM])
    train_idx, test_idx = [], []
    for cls in range(data.n_classes):
        members = np.flatnonzero(data.labels == cls)
        members = members[rng.permutation(len(members))]
        n_train = (4 * len(members)) // 5
        if len(members) >= 2:
            n_train = min(n_train, len(members) - 1)
            n_train = max(n_train, 1)
        train_idx.append(members[:n_train])
        test_idx.append(members[n_train:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))


def _subset(data: Dataset, idx: np.ndarray) -> Dataset:
    return Dataset(
        features=data.features[idx],
        labels=data.labels[idx],
        class_counts=np.bincount(data.labels[idx], minlength=data.n_classes),
    )


def _build_task(cfg: ExperimentConfig) -> _TaskData:
    if cfg.task == "quadratic":
        return _TaskData(problem=quadratic_problem(dim=10, condition=100.0), classification=False)
    if cfg.task == "rosenbrock":
        return _TaskData(problem=rosenbrock_problem(), classification=False)

    data = synth_blobs(_BLOBS_COUNTS, _BLOBS_CENTERS, _BLOBS_SIGMA, seed=cfg.seed)
    train_idx, test_idx = _stratified_split(data, cfg.seed)
    train = _subset(data, train_idx)
    problem = logreg_problem(train) if cfg.task == "blobs" else mlp_problem(train, hidden=8)
    return _TaskData(
        problem=problem,
        classification=True,
        test_features=data.features[test_idx],
        test_labels=data.labels[test_idx],
    )


def _init_params(problem: Problem, rng: np.random.Generator) -> dict[str, Tensor]:
    if problem.start is not None:
        return dict(problem.start)
    return {
        name: tensor(0.1 * rng.standard_normal(math.prod(shape)), shape)
        for name, shape in problem.param_shapes.items()
    }


def run_training(
    cfg: ExperimentConfig, run_index: int, task_data: _TaskData | None = None
) -> tuple[list[RunRecord], ProbabilityMatrix | None]:
    """Train one seeded run; returns per-epoch records and, for
    classification tasks, the final probability outputs on the test split."""
    variant = cfg.variant_of_run(run_index)
    td = task_data if task_data is not None else _build_task(cfg)
    problem = td.problem
    run_seed = cfg.seed + run_index
    rng = np.random.default_rng([run_seed, _RUN_STREAM])

    params = _init_params(problem, rng)
    opt = Optimizer(cfg.optimizer_config(variant))
    n = problem.n_examples
    n_batches = math.ceil(n / cfg.batch_size)

    records: list[RunRecord] = []
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter() if cfg.timing else 0.0
        order = rng.permutation(n)
        batch_losses = []
        for b in range(n_batches):
            idx = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            loss = problem.eval(params, idx)
            if not math.isfinite(loss):
                raise DivergenceError(run_index, variant, epoch, records)
            grads = problem.grad(params, idx)
            params, _ = opt.step(params, grads)
            batch_losses.append(loss)
        train_loss = sum(batch_losses) / len(batch_losses)

        if td.classification:
            probs = problem.predict_proba(params, td.test_features)
            eval_accuracy = float(np.mean(np.argmax(probs, axis=1) == td.test_labels))
        else:
            eval_accuracy = 0.0
        wall_ms = (time.perf_counter() - started) * 1000.0 if cfg.timing else 0.0
        records.append(
            RunRecord(run_index, variant, cfg.task, run_seed, epoch, train_loss, eval_accuracy, wall_ms)
        )

    final = problem.eval(params, None)
    if not math.isfinite(final):
        raise DivergenceError(run_index, variant, cfg.epochs, records)
    pm = None
    if td.classification:
        pm = ProbabilityMatrix(problem.predict_proba(params, td.test_features))
    return records, pm


def _scores(pm: ProbabilityMatrix, labels: np.ndarray) -> FusionScores:
    cm = confusion(pm, labels)
    return FusionScores(cm.accuracy(), cm.weighted_f_score(), cm.weighted_g_mean())


def run_ensemble(cfg: ExperimentConfig) -> EnsembleReport:
    """Run every (optimizer, run) pair and fuse the classification outputs.

    Fusions reported: the average of each variant's runs, the average of all
    runs together, and, when exactly two variants are given, the weighted
    sum of the two per-variant fusions with weights 1 and 2 (second variant
    weighted double).
    """
    td = _build_task(cfg)
    report = EnsembleReport(config=cfg)
    outputs: dict[str, list[ProbabilityMatrix]] = {v: [] for v in cfg.optimizers}

    for run_index in range(cfg.total_runs):
        variant = cfg.variant_of_run(run_index)
        records, pm = run_training(cfg, run_index, td)
        report.records.extend(records)
        if pm is not None:
            outputs[variant].append(pm)
            scores = _scores(pm, td.test_labels)
            report.members.append(
                MemberResult(
                    run_id=run_index,
                    optimizer=variant,
                    seed=cfg.seed + run_index,
                    accuracy=scores.accuracy,
                    f_score=scores.f_score,
                    g_mean=scores.g_mean,
                    final_loss=records[-1].train_loss,
                )
            )
        else:
            report.members.append(
                MemberResult(
                    run_id=run_index,
                    optimizer=variant,
                    seed=cfg.seed + run_index,
                    accuracy=0.0,
                    f_score=0.0,
                    g_mean=0.0,
                    final_loss=records[-1].train_loss,
                )
            )

    if td.classification:
        variant_fused = {}
        for v in cfg.optimizers:
            variant_fused[v] = fuse_average(outputs[v])
            report.variant_fusions[v] = _scores(variant_fused[v], td.test_labels)
        everyone = [pm for v in cfg.optimizers for pm in outputs[v]]
        report.combined_fusion = _scores(fuse_average(everyone), td.test_labels)
        if len(cfg.optimizers) == 2:
            pair = fuse_weighted_sum(
                [variant_fused[cfg.optimizers[0]], variant_fused[cfg.optimizers[1]]], [1.0, 2.0]
            )
            report.weighted_fusion = _scores(pair, td.test_labels)
    return report


def emit_csv(records: list[RunRecord], path) -> None:
    """Fixed header, rows sorted by (run_id, epoch), floats at 17 significant
    digits, LF line endings: identical records give identical bytes."""
    rows = sorted(records, key=lambda r: (r.run_id, r.epoch))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow(
                [
                    str(r.run_id),
                    r.optimizer,
                    r.task,
                    str(r.seed),
                    str(r.epoch),
                    f"{r.train_loss:.17g}",
                    f"{r.eval_accuracy:.17g}",
                    f"{r.wall_ms:.17g}",
                ]
            )


def format_report(report: EnsembleReport) -> str:
    cfg = report.config
    lines = [
        f"task={cfg.task} optimizers={','.join(cfg.optimizers)} runs={cfg.runs} "
        f"epochs={cfg.epochs} batch_size={cfg.batch_size} seed={cfg.seed}"
    ]
    for m in report.members:
        if report.combined_fusion is not None:
            lines.append(
                f"member run_id={m.run_id} optimizer={m.optimizer} seed={m.seed} "
                f"accuracy={m.accuracy:.6f} f_score={m.f_score:.6f} g_mean={m.g_mean:.6f}"
            )
        else:
            lines.append(
                f"member run_id={m.run_id} optimizer={m.optimizer} seed={m.seed} "
                f"final_loss={m.final_loss:.6g}"
            )
    for v, s in report.variant_fusions.items():
        lines.append(
            f"fusion[{v}] accuracy={s.accuracy:.6f} f_score={s.f_score:.6f} g_mean={s.g_mean:.6f}"
        )
    if report.combined_fusion is not None:
        s = report.combined_fusion
        lines.append(
            f"fusion[combined] accuracy={s.accuracy:.6f} f_score={s.f_score:.6f} g_mean={s.g_mean:.6f}"
        )
    if report.weighted_fusion is not None:
        s = report.weighted_fusion
        lines.append(
            f"fusion[weighted 1:2] accuracy={s.accuracy:.6f} f_score={s.f_score:.6f} g_mean={s.g_mean:.6f}"
        )
    return "\n".join(lines)
