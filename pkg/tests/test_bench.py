import json
import math
import subprocess
import sys

import numpy as np
import pytest

import optbench.bench as bench
from optbench.bench import (
    CSV_HEADER,
    DivergenceError,
    ExperimentConfig,
    RunRecord,
    emit_csv,
    format_report,
    run_ensemble,
    run_training,
)
from optbench.cli import parse_cli
from optbench.ensemble import confusion, fuse_average


def small_cfg(**overrides):
    base = dict(task="blobs", optimizers=("adam",), runs=1, epochs=3, seed=1)
    base.update(overrides)
    return ExperimentConfig(**base)


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "optbench.cli", *args], capture_output=True, text=True
    )


# ------------------------------------------------------------------ config


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(task="mnist")
    with pytest.raises(ValueError):
        ExperimentConfig(optimizers=())
    with pytest.raises(ValueError):
        ExperimentConfig(optimizers=("adamw",))
    with pytest.raises(ValueError):
        ExperimentConfig(runs=0)
    with pytest.raises(ValueError):
        ExperimentConfig(epochs=0)
    with pytest.raises(ValueError):
        ExperimentConfig(batch_size=0)
    with pytest.raises(ValueError):
        ExperimentConfig(rho1=1.5)


def test_variant_of_run_spans_optimizers_in_blocks():
    cfg = small_cfg(optimizers=("exp", "explr"), runs=3)
    assert [cfg.variant_of_run(i) for i in range(6)] == ["exp"] * 3 + ["explr"] * 3
    with pytest.raises(ValueError):
        cfg.variant_of_run(6)


# ------------------------------------------------------------------ training


def test_run_training_is_deterministic():
    cfg = small_cfg()
    rec1, pm1 = run_training(cfg, 0)
    rec2, pm2 = run_training(cfg, 0)
    assert rec1 == rec2
    assert np.array_equal(pm1.probs, pm2.probs)


def test_run_records_carry_config_identity_and_monotone_epochs():
    cfg = small_cfg(seed=9)
    records, _ = run_training(cfg, 0)
    assert [r.epoch for r in records] == [1, 2, 3]
    for r in records:
        assert r.run_id == 0
        assert r.optimizer == "adam"
        assert r.task == "blobs"
        assert r.seed == 9
        assert math.isfinite(r.train_loss) and math.isfinite(r.eval_accuracy)
        assert r.wall_ms == 0.0


def test_runs_with_different_indices_differ():
    cfg = small_cfg(runs=2)
    _, pm0 = run_training(cfg, 0)
    _, pm1 = run_training(cfg, 1)
    assert not np.array_equal(pm0.probs, pm1.probs)


def test_step_count_is_epochs_times_batches(monkeypatch):
    counted = []
    real_optimizer = bench.Optimizer

    class CountingOptimizer(real_optimizer):
        def step(self, params, grads):
            counted.append(1)
            return super().step(params, grads)

    monkeypatch.setattr(bench, "Optimizer", CountingOptimizer)
    cfg = small_cfg(epochs=4, batch_size=30)
    run_training(cfg, 0)
    # train split of the blobs task has 144 rows: ceil(144/30) = 5 batches
    assert len(counted) == 4 * 5


def test_training_loss_decreases_on_blobs():
    cfg = small_cfg(epochs=30, lr=0.01)
    records, _ = run_training(cfg, 0)
    assert records[-1].train_loss < records[0].train_loss


def test_divergence_raises_with_partial_records():
    cfg = ExperimentConfig(task="rosenbrock", optimizers=("sgd",), runs=1, epochs=50, lr=1e6)
    with pytest.raises(DivergenceError) as exc:
        run_training(cfg, 0)
    assert exc.value.run_id == 0
    assert exc.value.variant == "sgd"


def test_timing_opt_in_populates_wall_ms():
    cfg = small_cfg(timing=True)
    records, _ = run_training(cfg, 0)
    assert all(r.wall_ms > 0.0 for r in records)


# ------------------------------------------------------------------ ensemble


def test_single_run_ensemble_equals_member_metrics():
    cfg = small_cfg(epochs=5)
    report = run_ensemble(cfg)
    member = report.members[0]
    fused = report.variant_fusions["adam"]
    assert fused.accuracy == member.accuracy
    assert fused.f_score == member.f_score
    assert fused.g_mean == member.g_mean
    assert report.combined_fusion.accuracy == member.accuracy


def test_combined_fusion_matches_direct_average_of_member_outputs():
    cfg = small_cfg(optimizers=("exp", "explr"), runs=2, epochs=4)
    report = run_ensemble(cfg)
    td = bench._build_task(cfg)
    members = [run_training(cfg, i, td)[1] for i in range(cfg.total_runs)]
    fused = fuse_average(members)
    cm = confusion(fused, td.test_labels)
    assert report.combined_fusion.accuracy == cm.accuracy()
    assert report.combined_fusion.f_score == cm.weighted_f_score()
    assert report.combined_fusion.g_mean == cm.weighted_g_mean()


def test_weighted_fusion_reported_only_for_two_variants():
    assert run_ensemble(small_cfg(epochs=2)).weighted_fusion is None
    report = run_ensemble(small_cfg(optimizers=("exp", "explr"), runs=1, epochs=2))
    assert report.weighted_fusion is not None


def test_non_classification_task_has_no_fusions():
    cfg = ExperimentConfig(task="quadratic", optimizers=("adam",), runs=2, epochs=5)
    report = run_ensemble(cfg)
    assert report.combined_fusion is None
    assert report.variant_fusions == {}
    assert len(report.records) == 10
    assert "final_loss" in format_report(report)


# ------------------------------------------------------------------ csv


def test_emit_csv_empty_records_writes_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_csv([], path)
    assert path.read_text() == ",".join(CSV_HEADER) + "\n"


def test_emit_csv_sorts_and_round_trips_floats(tmp_path):
    records = [
        RunRecord(1, "adam", "blobs", 8, 2, 0.25, 0.5, 0.0),
        RunRecord(0, "adam", "blobs", 7, 1, 1.0 / 3.0, 2.0 / 3.0, 0.0),
        RunRecord(1, "adam", "blobs", 8, 1, 0.125, 0.75, 0.0),
    ]
    path = tmp_path / "records.csv"
    emit_csv(records, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert [line.split(",")[0] for line in lines[1:]] == ["0", "1", "1"]
    loss = float(lines[1].split(",")[5])
    assert loss == 1.0 / 3.0


def test_emit_csv_bytes_are_reproducible(tmp_path):
    cfg = small_cfg(epochs=4)
    rec, _ = run_training(cfg, 0)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(rec, p1)
    emit_csv(list(reversed(rec)), p2)
    assert p1.read_bytes() == p2.read_bytes()


# ------------------------------------------------------------------ cli


def test_parse_cli_example_invocation_gets_defaults_elsewhere():
    cfg = parse_cli(["--optimizer", "explr", "--task", "blobs", "--runs", "10", "--seed", "7"])
    assert cfg.optimizers == ("explr",)
    assert cfg.task == "blobs"
    assert cfg.runs == 10
    assert cfg.seed == 7
    assert cfg.epochs == 20
    assert cfg.batch_size == 30
    assert cfg.lr == 0.001
    assert cfg.rho1 == 0.9
    assert cfg.rho2 == 0.999
    assert cfg.epsilon == 1e-8
    assert cfg.k == 4.0
    assert cfg.steps == 30
    assert cfg.norm_scope == "per_tensor"
    assert cfg.avg_mode == "squared_grad"
    assert cfg.timing is False


def test_parse_cli_comma_separated_optimizers():
    cfg = parse_cli(["--optimizer", "exp,explr"])
    assert cfg.optimizers == ("exp", "explr")


def test_parse_cli_rejects_out_of_range_decay():
    with pytest.raises(SystemExit) as exc:
        parse_cli(["--rho1", "1.5"])
    assert exc.value.code == 2


def test_parse_cli_rejects_unknown_flag():
    with pytest.raises(SystemExit) as exc:
        parse_cli(["--warmup", "5"])
    assert exc.value.code == 2


def test_parse_cli_config_file_with_flag_override(tmp_path):
    config = tmp_path / "exp.json"
    config.write_text(json.dumps({"task": "blobs", "epochs": 7, "seed": 3, "optimizer": "dgrad"}))
    cfg = parse_cli(["--config", str(config), "--seed", "11"])
    assert cfg.task == "blobs"
    assert cfg.epochs == 7
    assert cfg.optimizers == ("dgrad",)
    assert cfg.seed == 11  # flag wins over file


def test_parse_cli_config_file_rejects_unknown_keys(tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"momentum": 0.9}))
    with pytest.raises(SystemExit) as exc:
        parse_cli(["--config", str(config)])
    assert exc.value.code == 2


def test_cli_success_run_prints_report_and_writes_csv(tmp_path):
    out = tmp_path / "run.csv"
    proc = run_cli(
        "--task", "blobs", "--optimizer", "adam", "--runs", "1",
        "--epochs", "2", "--seed", "4", "--out", str(out),
    )
    assert proc.returncode == 0
    assert "member run_id=0 optimizer=adam" in proc.stdout
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 3


def test_cli_repeat_invocations_are_byte_identical(tmp_path):
    args = ["--task", "blobs", "--optimizer", "exp", "--runs", "2", "--epochs", "3", "--seed", "2"]
    out1, out2 = tmp_path / "first.csv", tmp_path / "second.csv"
    p1 = run_cli(*args, "--out", str(out1))
    p2 = run_cli(*args, "--out", str(out2))
    assert p1.returncode == 0 and p2.returncode == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert p1.stdout == p2.stdout


def test_cli_usage_error_exits_two():
    proc = run_cli("--no-such-flag")
    assert proc.returncode == 2
    assert "usage" in proc.stderr.lower()


def test_cli_divergent_run_exits_one():
    proc = run_cli(
        "--task", "rosenbrock", "--optimizer", "sgd", "--runs", "1",
        "--epochs", "50", "--lr", "1e6",
    )
    assert proc.returncode == 1
    assert "diverged" in proc.stderr


def test_cli_unwritable_output_exits_one(tmp_path):
    proc = run_cli(
        "--task", "blobs", "--optimizer", "adam", "--runs", "1", "--epochs", "1",
        "--out", str(tmp_path / "no" / "such" / "dir" / "x.csv"),
    )
    assert proc.returncode == 1
    assert "cannot write" in proc.stderr
