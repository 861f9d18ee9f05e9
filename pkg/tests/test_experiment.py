import json
from pathlib import Path

import numpy as np
import pytest

from app.api.cli import main
from app.core.errors import ConfigError, ReportError
from app.models.experiment import ExperimentPlan, RunResult, TechniqueId
from app.models.settings import DatasetSettings, NetworkSettings, TrainingSettings
from app.services import experiment as runner
from app.services.experiment import (
    RESULTS_FILE,
    STATUS_DATASET_ERROR,
    SUMMARY_COLUMNS,
    ResultStore,
    improvement_table,
    load_results,
    plan_exit_code,
    report,
    run_plan,
    summary_table,
)

TINY_NETWORK = NetworkSettings(filters=3, kernel=5, pool=3, hidden=4, fc_width=8)
QUICK_TRAINING = TrainingSettings(batch_size=16)


def _plan(tmp_path: Path, datasets, techniques, seeds=(0,), out="out", **extra) -> ExperimentPlan:
    return ExperimentPlan(
        datasets=datasets,
        techniques=list(techniques),
        seeds=list(seeds),
        output_dir=tmp_path / out,
        network=TINY_NETWORK,
        training=QUICK_TRAINING,
        **extra,
    )


def _motionsense(root: Path) -> DatasetSettings:
    return DatasetSettings(name="motionsense", root=root, epochs=1)


def _ok(dataset: str, technique: str, accuracy: float, seed: int = 0) -> RunResult:
    return RunResult(dataset=dataset, technique=technique, seed=seed, accuracy=accuracy, parameter_count=100)


# ---------------------------------------------------------------------------
# run_plan
# ---------------------------------------------------------------------------

def test_baseline_only_plan(tmp_path, motionsense_root):
    plan = _plan(tmp_path, [_motionsense(motionsense_root)], [TechniqueId.BASELINE])
    results = run_plan(plan)
    assert len(results) == 1
    (result,) = results
    assert result.ok and result.delta == 0.0
    assert 0 <= result.accuracy <= 100
    out = tmp_path / "out"
    assert len((out / RESULTS_FILE).read_text().splitlines()) == 1
    assert (out / "logs" / "motionsense-baseline-s0.jsonl").is_file()
    assert (out / "checkpoints" / "motionsense-baseline-s0.imum").is_file()
    assert plan_exit_code(results) == 0


def test_plan_cardinality_and_order(tmp_path, motionsense_root):
    techniques = [TechniqueId.MA10, TechniqueId.HEAD3, TechniqueId.NOISE, TechniqueId.ROT_Z]
    results = run_plan(_plan(tmp_path, [_motionsense(motionsense_root)], techniques, seeds=(0, 1)))
    assert len(results) == 2 * 5
    assert [(r.seed, r.technique) for r in results[:5]] == [
        (0, "baseline"),
        (0, "head3"),
        (0, "rot_z"),
        (0, "noise"),
        (0, "ma10"),
    ]
    baselines = {r.seed: r.accuracy for r in results if r.technique == "baseline"}
    for r in results:
        assert r.ok
        assert r.delta == pytest.approx(r.accuracy - baselines[r.seed])
    stored = load_results(tmp_path / "out" / RESULTS_FILE)
    assert [(r.technique, r.seed, r.accuracy) for r in stored] == [(r.technique, r.seed, r.accuracy) for r in results]


def test_rerun_writes_identical_results(tmp_path, motionsense_root):
    def once(out: str, workers: int) -> bytes:
        plan = _plan(tmp_path, [_motionsense(motionsense_root)], [TechniqueId.HEAD2], seeds=(0, 1), out=out, workers=workers)
        run_plan(plan)
        return (tmp_path / out / RESULTS_FILE).read_bytes()

    first = once("a", 1)
    assert once("a", 1) == first
    assert once("b", 2) == first


def test_unloadable_dataset_marks_every_run(tmp_path, motionsense_root):
    broken = DatasetSettings(name="ridi", root=tmp_path / "missing", epochs=1)
    plan = _plan(tmp_path, [broken, _motionsense(motionsense_root)], [TechniqueId.ROT_X], seeds=(0, 1))
    results = run_plan(plan)
    lost = [r for r in results if r.dataset == "ridi"]
    assert len(lost) == 4
    assert all(r.status == STATUS_DATASET_ERROR and r.error for r in lost)
    assert all(r.ok for r in results if r.dataset == "motionsense")
    assert plan_exit_code(results) == 2


def test_garbled_uci_har_file_only_loses_that_dataset(tmp_path, uci_har_root, motionsense_root):
    folder = uci_har_root / "UCI HAR Dataset" / "train" / "Inertial Signals"
    np.savetxt(folder / "body_gyro_z_train.txt", np.zeros((11, 128)), fmt="%.8e")
    garbled = DatasetSettings(name="uci_har", root=uci_har_root, epochs=1)
    results = run_plan(_plan(tmp_path, [garbled, _motionsense(motionsense_root)], [TechniqueId.BASELINE]))
    assert [(r.dataset, r.status) for r in results] == [("uci_har", STATUS_DATASET_ERROR), ("motionsense", "ok")]
    assert "body_gyro_z_train.txt" in results[0].error
    assert plan_exit_code(results) == 2


def test_unexpected_error_becomes_a_failed_record(tmp_path, motionsense_root, monkeypatch):
    calls = []

    def flaky_train(*args, **kwargs):
        calls.append(1)
        if len(calls) == 2:
            raise RuntimeError("matrix exploded")
        return real_train(*args, **kwargs)

    real_train = runner.train
    monkeypatch.setattr(runner, "train", flaky_train)
    plan = _plan(tmp_path, [_motionsense(motionsense_root)], [TechniqueId.HEAD2, TechniqueId.ROT_Z])
    results = run_plan(plan)
    assert [(r.technique, r.status) for r in results] == [("baseline", "ok"), ("head2", "failed"), ("rot_z", "ok")]
    assert results[1].error == "RuntimeError: matrix exploded"
    assert results[2].delta == pytest.approx(results[2].accuracy - results[0].accuracy)
    assert [r.status for r in load_results(tmp_path / "out" / RESULTS_FILE)] == ["ok", "failed", "ok"]
    assert plan_exit_code(results) == 3


class _Interrupted(BaseException):
    pass


def test_finished_runs_survive_an_interrupted_plan(tmp_path, motionsense_root, monkeypatch):
    calls = []

    def interrupted_train(*args, **kwargs):
        calls.append(1)
        if len(calls) == 3:
            raise _Interrupted()
        return real_train(*args, **kwargs)

    real_train = runner.train
    monkeypatch.setattr(runner, "train", interrupted_train)
    plan = _plan(tmp_path, [_motionsense(motionsense_root)], [TechniqueId.HEAD2, TechniqueId.NOISE])
    with pytest.raises(_Interrupted):
        run_plan(plan)
    stored = load_results(tmp_path / "out" / RESULTS_FILE)
    assert [(r.technique, r.status) for r in stored] == [("baseline", "ok"), ("head2", "ok")]
    assert stored[1].delta == pytest.approx(stored[1].accuracy - stored[0].accuracy)


def test_cached_rerun_trains_on_identical_inputs(tmp_path, motionsense_root):
    def once(out: str) -> bytes:
        datasets = [_motionsense(motionsense_root)]
        plan = _plan(tmp_path, datasets, [TechniqueId.BASELINE], out=out, cache_dir=tmp_path / "cache")
        run_plan(plan)
        return (tmp_path / out / "checkpoints" / "motionsense-baseline-s0.imum").read_bytes()

    fresh = once("a")
    assert list((tmp_path / "cache").iterdir())
    assert once("b") == fresh


def test_combinations_are_rejected(tmp_path, motionsense_root):
    plan = _plan(
        tmp_path,
        [_motionsense(motionsense_root)],
        [TechniqueId.BASELINE],
        combinations=[[TechniqueId.ROT_X, TechniqueId.MA10]],
    )
    with pytest.raises(ConfigError):
        run_plan(plan)


def test_exit_code_for_failed_runs():
    failed = RunResult(dataset="ridi", technique="ma50", seed=0, status="failed", error="too short")
    assert plan_exit_code([_ok("ridi", "baseline", 70.0), failed]) == 3


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

FOUR_DATASETS = [
    _ok("ridi", "baseline", 80.0),
    _ok("ridi", "noise", 83.5),
    _ok("motionsense", "baseline", 80.0),
    _ok("motionsense", "noise", 81.0),
    _ok("uci_har", "baseline", 80.0),
    _ok("uci_har", "noise", 79.0),
    _ok("usc_sipi", "baseline", 80.0),
    _ok("usc_sipi", "noise", 80.0),
]


def test_summary_counts_improved_datasets():
    summary = summary_table(improvement_table(FOUR_DATASETS))
    assert list(summary.columns) == SUMMARY_COLUMNS
    row = summary.iloc[0]
    assert row["technique"] == "noise"
    assert (row["datasets"], row["datasets_improved"], row["max_improvement"]) == (4, 2, 3.5)


def test_improvement_deltas_average_over_seeds():
    results = [
        _ok("ridi", "baseline", 70.0, seed=0),
        _ok("ridi", "baseline", 74.0, seed=1),
        _ok("ridi", "head2", 75.0, seed=0),
        _ok("ridi", "head2", 73.0, seed=1),
    ]
    table = improvement_table(results)
    assert list(table["technique"]) == ["baseline", "head2"]
    head2 = table.iloc[1]
    assert head2["seeds"] == 2
    assert head2["accuracy_mean"] == pytest.approx(74.0)
    assert head2["baseline_mean"] == pytest.approx(72.0)
    assert (head2["delta_min"], head2["delta_max"]) == (-1.0, 5.0)
    assert head2["delta_mean"] == pytest.approx(2.0)


def test_missing_baseline_names_the_dataset():
    results = [_ok("motionsense", "baseline", 90.0), _ok("ridi", "rot_y", 60.0)]
    with pytest.raises(ReportError, match="ridi"):
        improvement_table(results)


def test_empty_results_cannot_be_reported(tmp_path):
    with pytest.raises(ReportError):
        report([], tmp_path)


def test_report_files_are_reproducible(tmp_path):
    results = FOUR_DATASETS + [
        RunResult(dataset="ridi", technique="ma50", seed=0, status="failed", error="stream too short")
    ]
    first = report(results, tmp_path / "a")
    report(results, tmp_path / "b")
    for name in ("improvements.csv", "summary.csv", "failures.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert len(first.failures) == 1
    assert {p.name for p in first.charts} == {
        "delta_ridi.png",
        "delta_motionsense.png",
        "delta_uci_har.png",
        "delta_usc_sipi.png",
        "summary.png",
    }
    assert all(p.is_file() for p in first.charts)


def test_fully_failed_dataset_only_appears_in_failures(tmp_path):
    results = [
        _ok("ridi", "baseline", 80.0),
        _ok("ridi", "rot_x", 82.0),
        RunResult(dataset="usc_sipi", technique="baseline", seed=0, status=STATUS_DATASET_ERROR, error="gone"),
        RunResult(dataset="usc_sipi", technique="rot_x", seed=0, status=STATUS_DATASET_ERROR, error="gone"),
    ]
    tables = report(results, tmp_path, charts=False)
    assert set(tables.improvements["dataset"]) == {"ridi"}
    assert list(tables.failures["dataset"]) == ["usc_sipi", "usc_sipi"]
    assert tables.charts == []


# ---------------------------------------------------------------------------
# results file
# ---------------------------------------------------------------------------

def test_result_store_keeps_wall_time_aside(tmp_path):
    store = ResultStore(tmp_path)
    store.reset()
    store.append(RunResult(dataset="ridi", technique="baseline", seed=0, accuracy=50.0, wall_time_s=12.5))
    record = json.loads(store.results_path.read_text())
    assert "wall_time_s" not in record
    timing = json.loads(store.timings_path.read_text())
    assert timing["wall_time_s"] == 12.5
    assert load_results(store.results_path)[0].accuracy == 50.0


def test_bad_results_line_is_reported(tmp_path):
    path = tmp_path / RESULTS_FILE
    path.write_text(_ok("ridi", "baseline", 1.0).model_dump_json() + "\n{broken\n", encoding="utf-8")
    with pytest.raises(ReportError, match="line 2"):
        load_results(path)
    with pytest.raises(ReportError):
        load_results(tmp_path / "absent.jsonl")


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def test_cli_missing_config_exits_with_config_code(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.yaml")]) == 1


def test_cli_report_without_results(tmp_path):
    assert main(["report", "--results", str(tmp_path / "absent.jsonl"), "--out", str(tmp_path / "r")]) == 1


def test_cli_run_then_report(tmp_path, motionsense_root, capsys):
    out = tmp_path / "results"
    config = tmp_path / "bench.yaml"
    config.write_text(
        "\n".join(
            [
                f"output_dir: {out}",
                "techniques: [baseline, rot_all]",
                "datasets:",
                "  - name: motionsense",
                f"    root: {motionsense_root}",
                "    epochs: 1",
                "network: {filters: 3, hidden: 4, fc_width: 8}",
                "training: {batch_size: 16}",
            ]
        ),
        encoding="utf-8",
    )
    assert main(["run", "--config", str(config)]) == 0
    assert "rot_all" in capsys.readouterr().out
    assert main(["report", "--results", str(out / RESULTS_FILE), "--out", str(out), "--no-charts"]) == 0
    assert "rot_all" in capsys.readouterr().out
    assert (out / "summary.csv").is_file()


def test_cli_summarize_dataset(tmp_path, motionsense_root, capsys):
    chart = tmp_path / "classes.png"
    code = main(["summarize-dataset", "--name", "motionsense", "--root", str(motionsense_root), "--out", str(chart)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "walking" in printed and "total:" in printed
    assert chart.is_file()


def test_cli_summarize_missing_root(tmp_path):
    assert main(["summarize-dataset", "--name", "ridi", "--root", str(tmp_path / "nothing")]) == 2


def test_cli_summarize_garbled_uci_har(uci_har_root):
    folder = uci_har_root / "UCI HAR Dataset" / "train" / "Inertial Signals"
    np.savetxt(folder / "body_gyro_z_train.txt", np.zeros((11, 128)), fmt="%.8e")
    assert main(["summarize-dataset", "--name", "uci_har", "--root", str(uci_har_root)]) == 2
