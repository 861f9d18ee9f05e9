"""Config-driven runner over (dataset, technique, seed) and the improvement-over-baseline report"""
import functools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import pandas as pd
from pydantic import ValidationError

from app.core.assets import ReportChartManager
from app.core.containers import save_checkpoint
from app.core.errors import BenchmarkError, ConfigError, DatasetError, ReportError, TrainingError
from app.core.log import get_logger
from app.models.experiment import ExperimentPlan, ModelSpec, RunResult, TechniqueId, TrainConfig
from app.models.settings import DatasetSettings, NetworkSettings, TrainingSettings
from app.models.signals import Dataset
from app.services.augmentation import NoiseSpec, RotationAxis, augment_noise, augment_rotation
from app.services.ingestion import READERS, load_dataset
from app.services.models_training import build_model, evaluate, train
from app.services.preprocessing import MaSpec
from app.services.signal_core import fit_stats, normalize_all

logger = get_logger(__name__)

PathLike = Union[str, Path]

RESULTS_FILE = "results.jsonl"
TIMINGS_FILE = "timings.jsonl"
IMPROVEMENTS_FILE = "improvements.csv"
SUMMARY_FILE = "summary.csv"
FAILURES_FILE = "failures.csv"

STATUS_OK = "ok"
STATUS_FAILED = "failed"
STATUS_DATASET_ERROR = "dataset_error"

IMPROVEMENT_COLUMNS = [
    "dataset",
    "technique",
    "seeds",
    "accuracy_mean",
    "baseline_mean",
    "delta_mean",
    "delta_min",
    "delta_max",
    "parameter_count",
]
SUMMARY_COLUMNS = ["technique", "datasets", "datasets_improved", "max_improvement"]
FAILURE_COLUMNS = ["dataset", "technique", "seed", "status", "error"]
CSV_FLOAT_FORMAT = "%.6f"


def run_name(dataset: str, technique: str, seed: int) -> str:
    return f"{dataset}-{technique}-s{seed}"


def _append_line(path: Path, line: str) -> None:
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(line + "\n")
        handle.flush()
        os.fsync(handle.fileno())


class ResultStore:
    """Append-only ``results.jsonl`` plus the wall-time side file"""

    def __init__(self, output_dir: PathLike):
        self.output_dir = Path(output_dir)
        self.results_path = self.output_dir / RESULTS_FILE
        self.timings_path = self.output_dir / TIMINGS_FILE

    def reset(self) -> None:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        for path in (self.results_path, self.timings_path):
            path.write_text("", encoding="utf-8")

    def append(self, result: RunResult) -> None:
        _append_line(self.results_path, result.model_dump_json())
        if result.wall_time_s is not None:
            timing = {
                "dataset": result.dataset,
                "technique": result.technique,
                "seed": result.seed,
                "wall_time_s": round(result.wall_time_s, 3),
            }
            _append_line(self.timings_path, json.dumps(timing))


def load_results(path: PathLike) -> List[RunResult]:
    """Read the run records of a ``results.jsonl`` file"""
    path = Path(path)
    if not path.is_file():
        raise ReportError("results file not found", path=str(path))
    results = []
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            results.append(RunResult.model_validate_json(line))
        except ValidationError as exc:
            raise ReportError(f"line {number} is not a run record: {exc}", path=str(path)) from exc
    return results


# ---------------------------------------------------------------------------
# Single run
# ---------------------------------------------------------------------------

def prepare_training_data(dataset: Dataset, technique: TechniqueId, seed: int, noise_fraction: float) -> Dataset:
    """Augment the training split for the technique, then normalize both splits with training statistics"""
    train_windows = list(dataset.train)
    if technique.rotation_axis is not None:
        train_windows = augment_rotation(train_windows, RotationAxis(technique.rotation_axis))
    elif technique is TechniqueId.NOISE:
        spec = NoiseSpec(fraction=noise_fraction, seed=seed)
        train_windows = augment_noise(train_windows, spec, fit_stats(train_windows))
    stats = fit_stats(train_windows)
    return dataset.replace(train=normalize_all(train_windows, stats), test=normalize_all(dataset.test, stats))


def model_spec(technique: TechniqueId, n_classes: int, network: NetworkSettings) -> ModelSpec:
    return ModelSpec.for_variant(
        technique.variant,
        n_classes,
        hidden=network.hidden,
        filters=network.filters,
        kernel=network.kernel,
        pool=network.pool,
        fc_width=network.fc_width,
        dropout=network.dropout,
        reduction=network.reduction,
        fc_activation=network.fc_activation,
    )


def train_config(training: TrainingSettings, epochs: int, seed: int) -> TrainConfig:
    return TrainConfig(
        lr=training.learning_rate,
        batch_size=training.batch_size,
        epochs=epochs,
        seed=seed,
        beta1=training.beta1,
        beta2=training.beta2,
        eps=training.eps,
        eval_every=training.eval_every,
        debug=training.debug,
    )


@dataclass
class RunJob:
    """Everything one worker needs to train and evaluate a single run"""

    dataset: Dataset
    technique: TechniqueId
    seed: int
    epochs: int
    noise_fraction: float
    network: NetworkSettings
    training: TrainingSettings
    output_dir: Path

    @property
    def name(self) -> str:
        return run_name(self.dataset.name, self.technique.value, self.seed)


def _failed_run(job: RunJob, error: str, started: float) -> RunResult:
    return RunResult(
        dataset=job.dataset.name,
        technique=job.technique.value,
        seed=job.seed,
        status=STATUS_FAILED,
        error=error,
        wall_time_s=time.perf_counter() - started,
    )


def execute_run(job: RunJob) -> RunResult:
    started = time.perf_counter()
    logger.info("run %s started", job.name)
    try:
        prepared = prepare_training_data(job.dataset, job.technique, job.seed, job.noise_fraction)
        model = build_model(model_spec(job.technique, prepared.n_classes, job.network), seed=job.seed)
        log_path = job.output_dir / "logs" / f"{job.name}.jsonl"
        if log_path.exists():
            log_path.unlink()
        model, log = train(model, prepared, train_config(job.training, job.epochs, job.seed), log_path=log_path)
        accuracy = log.final_accuracy
        if accuracy is None:
            accuracy = evaluate(model, prepared.test)
        save_checkpoint(job.output_dir / "checkpoints" / f"{job.name}.imum", model)
    except BenchmarkError as exc:
        logger.error("run %s failed: %s", job.name, exc)
        return _failed_run(job, str(exc), started)
    except Exception as exc:
        logger.exception("run %s crashed", job.name)
        return _failed_run(job, f"{type(exc).__name__}: {exc}", started)
    best_epoch, best_accuracy = log.best
    logger.info("run %s finished: accuracy %.2f%% (best %s at epoch %s)", job.name, accuracy, best_accuracy, best_epoch)
    return RunResult(
        dataset=job.dataset.name,
        technique=job.technique.value,
        seed=job.seed,
        accuracy=accuracy,
        best_accuracy=best_accuracy,
        best_epoch=best_epoch,
        parameter_count=model.parameter_count,
        wall_time_s=time.perf_counter() - started,
    )


# ---------------------------------------------------------------------------
# Plan
# ---------------------------------------------------------------------------

def _failure(dataset: str, technique: TechniqueId, seed: int, status: str, error: BaseException) -> RunResult:
    return RunResult(dataset=dataset, technique=technique.value, seed=seed, status=status, error=str(error))


class PlanRecorder:
    """Persists each run record as soon as it is known, with its same-seed baseline delta"""

    def __init__(self, store: ResultStore):
        self.store = store
        self.results: List[RunResult] = []
        self._baselines: Dict[Tuple[str, int], float] = {}

    def record(self, result: RunResult) -> RunResult:
        key = (result.dataset, result.seed)
        if result.ok and result.technique == TechniqueId.BASELINE.value:
            self._baselines[key] = result.accuracy
        # the baseline of a seed precedes its techniques in plan order
        if result.ok and key in self._baselines:
            result = result.with_baseline(self._baselines[key])
        self.store.append(result)
        self.results.append(result)
        return result


def _dataset_variants(
    settings: DatasetSettings, plan: ExperimentPlan, techniques: Sequence[TechniqueId]
) -> Tuple[Dict[Optional[int], Dataset], Dict[int, BenchmarkError]]:
    """Raw dataset plus one denoised copy per requested moving-average window"""
    reader = functools.lru_cache(maxsize=1)(lambda: READERS[settings.name](settings.root))
    variants: Dict[Optional[int], Dataset] = {
        None: load_dataset(settings, plan.split, cache_dir=plan.cache_dir, reader=reader)
    }
    failures: Dict[int, BenchmarkError] = {}
    for technique in techniques:
        n = technique.moving_average
        if n is None or n in variants:
            continue
        try:
            variants[n] = load_dataset(settings, plan.split, MaSpec(n), cache_dir=plan.cache_dir, reader=reader)
        except BenchmarkError as exc:
            logger.error("%s: moving average %d unavailable: %s", settings.name, n, exc)
            failures[n] = exc
    return variants, failures


def _run_dataset(settings: DatasetSettings, plan: ExperimentPlan, recorder: PlanRecorder) -> None:
    techniques = plan.ordered_techniques()
    try:
        variants, variant_failures = _dataset_variants(settings, plan, techniques)
    except BenchmarkError as exc:
        logger.error("dataset %s could not be loaded: %s", settings.name, exc)
        for seed in plan.seeds:
            for technique in techniques:
                recorder.record(_failure(settings.name, technique, seed, STATUS_DATASET_ERROR, exc))
        return

    slots: List[Union[RunJob, RunResult]] = []
    for seed in plan.seeds:
        for technique in techniques:
            n = technique.moving_average
            if n in variant_failures:
                slots.append(_failure(settings.name, technique, seed, STATUS_FAILED, variant_failures[n]))
                continue
            slots.append(
                RunJob(
                    dataset=variants[n],
                    technique=technique,
                    seed=seed,
                    epochs=settings.resolved_epochs,
                    noise_fraction=settings.noise_fraction or plan.augmentation.noise_fraction,
                    network=plan.network,
                    training=plan.training,
                    output_dir=Path(plan.output_dir),
                )
            )

    jobs = [slot for slot in slots if isinstance(slot, RunJob)]
    if plan.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            _record_in_order(slots, pool.map(execute_run, jobs), recorder)
    else:
        _record_in_order(slots, map(execute_run, jobs), recorder)


def _record_in_order(
    slots: Sequence[Union[RunJob, RunResult]], finished: Iterable[RunResult], recorder: PlanRecorder
) -> None:
    # plan order, whichever worker finished first; each record is written before the next run is awaited
    finished = iter(finished)
    for slot in slots:
        recorder.record(next(finished) if isinstance(slot, RunJob) else slot)


def run_plan(plan: ExperimentPlan) -> List[RunResult]:
    """Run every (dataset, technique, seed) of the plan, appending one record per run as it completes"""
    if plan.combinations:
        raise ConfigError("technique combinations are not supported yet")
    store = ResultStore(plan.output_dir)
    store.reset()
    recorder = PlanRecorder(store)
    for settings in plan.datasets:
        logger.info("dataset %s: %d techniques x %d seeds", settings.name, len(plan.ordered_techniques()), len(plan.seeds))
        _run_dataset(settings, plan, recorder)
    everything = recorder.results
    failed = sum(not r.ok for r in everything)
    logger.info("plan finished: %d runs, %d failed; results in %s", len(everything), failed, store.results_path)
    return everything


def plan_exit_code(results: Sequence[RunResult]) -> int:
    if any(r.status == STATUS_DATASET_ERROR for r in results):
        return DatasetError.exit_code
    if any(not r.ok for r in results):
        return TrainingError.exit_code
    return 0


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

_TECHNIQUE_ORDER = {t.value: i for i, t in enumerate(TechniqueId)}


def _canonical(frame: pd.DataFrame, by: List[str]) -> pd.DataFrame:
    keyed = frame.assign(_order=frame["technique"].map(_TECHNIQUE_ORDER).fillna(len(_TECHNIQUE_ORDER)))
    keys = [k if k != "technique" else "_order" for k in by]
    return keyed.sort_values(keys + ["technique"], kind="mergesort").drop(columns="_order").reset_index(drop=True)


def improvement_table(results: Sequence[RunResult]) -> pd.DataFrame:
    """Per dataset and technique: seeds, mean accuracy, mean baseline and delta statistics"""
    if not results:
        raise ReportError("no run results to report")
    ok = [r for r in results if r.ok]
    baselines = {(r.dataset, r.seed): r.accuracy for r in ok if r.technique == TechniqueId.BASELINE.value}
    rows = []
    for r in ok:
        key = (r.dataset, r.seed)
        if key not in baselines:
            raise ReportError(f"dataset {r.dataset} has no successful baseline run for seed {r.seed}")
        rows.append(
            {
                "dataset": r.dataset,
                "technique": r.technique,
                "seed": r.seed,
                "accuracy": r.accuracy,
                "baseline": baselines[key],
                "delta": r.accuracy - baselines[key],
                "parameter_count": r.parameter_count,
            }
        )
    if not rows:
        return pd.DataFrame(columns=IMPROVEMENT_COLUMNS)
    grouped = (
        pd.DataFrame(rows)
        .groupby(["dataset", "technique"], sort=True)
        .agg(
            seeds=("seed", "nunique"),
            accuracy_mean=("accuracy", "mean"),
            baseline_mean=("baseline", "mean"),
            delta_mean=("delta", "mean"),
            delta_min=("delta", "min"),
            delta_max=("delta", "max"),
            parameter_count=("parameter_count", "max"),
        )
        .reset_index()
    )
    grouped["parameter_count"] = grouped["parameter_count"].astype("Int64")
    return _canonical(grouped, ["dataset", "technique"])[IMPROVEMENT_COLUMNS]


def summary_table(improvements: pd.DataFrame) -> pd.DataFrame:
    """Per technique: datasets evaluated, datasets with a positive mean delta, and the largest mean delta"""
    techniques = improvements[improvements["technique"] != TechniqueId.BASELINE.value]
    if techniques.empty:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)
    summary = (
        techniques.groupby("technique", sort=True)
        .agg(
            datasets=("dataset", "nunique"),
            datasets_improved=("delta_mean", lambda d: int((d > 0).sum())),
            max_improvement=("delta_mean", "max"),
        )
        .reset_index()
    )
    return _canonical(summary, ["technique"])[SUMMARY_COLUMNS]


def failure_table(results: Sequence[RunResult]) -> pd.DataFrame:
    rows = [
        {"dataset": r.dataset, "technique": r.technique, "seed": r.seed, "status": r.status, "error": r.error}
        for r in results
        if not r.ok
    ]
    return pd.DataFrame(rows, columns=FAILURE_COLUMNS)


@dataclass
class ReportTables:
    improvements: pd.DataFrame
    summary: pd.DataFrame
    failures: pd.DataFrame
    charts: List[Path] = field(default_factory=list)


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


def report(results: Sequence[RunResult], out_dir: PathLike, charts: bool = True) -> ReportTables:
    """Write the improvement, summary and failure tables plus the delta charts"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    improvements = improvement_table(results)
    summary = summary_table(improvements)
    failures = failure_table(results)
    _write_csv(improvements, out_dir / IMPROVEMENTS_FILE)
    _write_csv(summary, out_dir / SUMMARY_FILE)
    _write_csv(failures, out_dir / FAILURES_FILE)
    tables = ReportTables(improvements=improvements, summary=summary, failures=failures)
    if charts:
        for dataset in improvements["dataset"].unique():
            rows = improvements[improvements["dataset"] == dataset]
            if (rows["technique"] != TechniqueId.BASELINE.value).any():
                tables.charts.append(
                    ReportChartManager.delta_chart(improvements, dataset, out_dir / f"delta_{dataset}.png")
                )
        if not summary.empty:
            tables.charts.append(ReportChartManager.summary_chart(summary, out_dir / "summary.png"))
    logger.info(
        "report: %d dataset/technique rows, %d failures, %d charts in %s",
        len(improvements),
        len(failures),
        len(tables.charts),
        out_dir,
    )
    return tables
