"""Parsers for the four public datasets and assembly into subject-split ``Dataset`` objects.

Units are normalized here: accelerometers to m/s^2 (gravity-inclusive), gyroscopes to rad/s.
"""
import hashlib
import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import chardet
import numpy as np
import pandas as pd
from scipy.io import loadmat

from app.core.containers import read_dataset_cache, write_dataset_cache
from app.core.errors import CacheError, IngestionError, SplitError
from app.core.log import get_logger
from app.models.settings import DatasetSettings, SplitSettings
from app.models.signals import Dataset, DatasetDraft, LabeledStream, Window
from app.services.preprocessing import MaSpec, denoise_stream
from app.services.signal_core import segment_stream, split_on_invalid

logger = get_logger(__name__)

GRAVITY = 9.80665
DEG_TO_RAD = math.pi / 180.0
LOADER_VERSION = 1
PARSE_WORKERS = 4

PathLike = Union[str, Path]


@dataclass
class Recordings:
    """Parsed, unit-normalized streams of one dataset before windowing"""

    name: str
    rate_hz: int
    classes: Tuple[str, ...]
    streams: List[LabeledStream]
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def subjects(self) -> List[int]:
        return sorted({s.subject for s in self.streams})


# ---------------------------------------------------------------------------
# File helpers
# ---------------------------------------------------------------------------

def sniff_encoding(path: Path, sample_bytes: int = 32768) -> str:
    with open(path, "rb") as handle:
        head = handle.read(sample_bytes)
    guess = chardet.detect(head).get("encoding") if head else None
    if not guess or guess.lower() == "ascii":
        return "utf-8"
    return guess


def _read_table(path: Path, **kwargs: Any) -> pd.DataFrame:
    try:
        return pd.read_csv(path, encoding=sniff_encoding(path), **kwargs)
    except (OSError, UnicodeDecodeError, ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IngestionError(f"cannot parse file: {exc}", path=str(path)) from exc


def _columns(frame: pd.DataFrame, names: Sequence[str], path: Path) -> np.ndarray:
    missing = [c for c in names if c not in frame.columns]
    if missing:
        raise IngestionError(f"missing columns {missing}", path=str(path))
    try:
        return frame[list(names)].to_numpy(dtype=np.float64)
    except ValueError as exc:
        raise IngestionError(f"non-numeric values in {list(names)}", path=str(path)) from exc


def _parse_all(paths: Sequence[Path], parse: Callable[[Path], Any]) -> List[Any]:
    # map keeps input order, so results are deterministic
    with ThreadPoolExecutor(max_workers=PARSE_WORKERS) as pool:
        return list(pool.map(parse, paths))


def _finite_streams(name: str, streams: Sequence[LabeledStream]) -> Tuple[List[LabeledStream], int]:
    kept: List[LabeledStream] = []
    rejected = 0
    for stream in streams:
        runs, bad = split_on_invalid(stream)
        kept.extend(runs)
        rejected += bad
    if rejected:
        logger.warning("%s: rejected %d non-finite rows", name, rejected)
    return kept, rejected


def _require_dir(root: PathLike, dataset: str) -> Path:
    root = Path(root)
    if not root.is_dir():
        raise IngestionError(f"{dataset} root is not a directory", path=str(root))
    return root


# ---------------------------------------------------------------------------
# RIDI
# ---------------------------------------------------------------------------

RIDI_CLASSES = ("pocket", "bag", "handheld", "body")
RIDI_RATE = 200
RIDI_PLACEMENTS = {
    "leg": "pocket",
    "pocket": "pocket",
    "bag": "bag",
    "handheld": "handheld",
    "hand": "handheld",
    "body": "body",
}
RIDI_ACC = ("acce_x", "acce_y", "acce_z")
RIDI_GYRO = ("gyro_x", "gyro_y", "gyro_z")


def _ridi_sequences(root: Path) -> List[Tuple[str, Path]]:
    base = root / "data_publish_v2" if (root / "data_publish_v2").is_dir() else root
    found = []
    for folder in sorted(p for p in base.iterdir() if p.is_dir()):
        for candidate in (folder / "processed" / "data.csv", folder / "data.csv"):
            if candidate.is_file():
                found.append((folder.name, candidate))
                break
    return found


def parse_ridi_sequence(name: str) -> Tuple[str, str]:
    """``dan_bag1`` -> (``dan``, ``bag``); the placement tag names the class"""
    subject, _, tag = name.rpartition("_")
    placement = re.sub(r"\d+$", "", tag).lower()
    if not subject or placement not in RIDI_PLACEMENTS:
        raise IngestionError(f"unknown RIDI placement tag in recording {name!r}")
    return subject, RIDI_PLACEMENTS[placement]


def read_ridi(root: PathLike) -> Recordings:
    root = _require_dir(root, "RIDI")
    sequences = _ridi_sequences(root)
    if not sequences:
        raise IngestionError("no RIDI recordings (*/processed/data.csv) found", path=str(root))
    tagged = [(name, path, *parse_ridi_sequence(name)) for name, path in sequences]
    subject_ids = {s: i for i, s in enumerate(sorted({t[2] for t in tagged}))}

    def parse(item: Tuple[str, Path, str, str]) -> LabeledStream:
        name, path, subject, placement = item
        frame = _read_table(path)
        values = np.hstack([_columns(frame, RIDI_ACC, path), _columns(frame, RIDI_GYRO, path)])
        labels = np.full(values.shape[0], RIDI_CLASSES.index(placement))
        logger.debug("RIDI %s: %d rows", name, values.shape[0])
        return LabeledStream(values, labels, subject_ids[subject], RIDI_RATE, source=str(path))

    streams, rejected = _finite_streams("ridi", _parse_all(tagged, parse))
    return Recordings(
        name="ridi",
        rate_hz=RIDI_RATE,
        classes=RIDI_CLASSES,
        streams=streams,
        provenance={"root": str(root), "files": len(tagged), "rejected_rows": rejected, "subjects": subject_ids},
    )


# ---------------------------------------------------------------------------
# MotionSense
# ---------------------------------------------------------------------------

MOTIONSENSE_CLASSES = ("walking", "jogging", "sitting", "standing", "stairs down", "stairs up")
MOTIONSENSE_RATE = 50
MOTIONSENSE_CODES = {"wlk": "walking", "jog": "jogging", "sit": "sitting", "std": "standing", "dws": "stairs down", "ups": "stairs up"}
MOTIONSENSE_GRAVITY = ("gravity.x", "gravity.y", "gravity.z")
MOTIONSENSE_USER_ACC = ("userAcceleration.x", "userAcceleration.y", "userAcceleration.z")
MOTIONSENSE_GYRO = ("rotationRate.x", "rotationRate.y", "rotationRate.z")


def read_motionsense(root: PathLike) -> Recordings:
    root = _require_dir(root, "MotionSense")
    base = root / "A_DeviceMotion_data" if (root / "A_DeviceMotion_data").is_dir() else root
    folders = sorted(p for p in base.iterdir() if p.is_dir())
    items: List[Tuple[Path, int, int]] = []
    for folder in folders:
        code = folder.name.split("_")[0].lower()
        if code not in MOTIONSENSE_CODES:
            raise IngestionError(f"unknown MotionSense activity folder {folder.name!r}", path=str(folder))
        label = MOTIONSENSE_CLASSES.index(MOTIONSENSE_CODES[code])
        for path in sorted(folder.glob("sub_*.csv")):
            match = re.fullmatch(r"sub_(\d+)\.csv", path.name)
            if not match:
                raise IngestionError("unexpected MotionSense file name", path=str(path))
            items.append((path, int(match.group(1)), label))
    if not items:
        raise IngestionError("no MotionSense recordings (<activity>_<trial>/sub_<n>.csv) found", path=str(root))

    def parse(item: Tuple[Path, int, int]) -> LabeledStream:
        path, subject, label = item
        frame = _read_table(path)
        # device-motion reports gravity and user acceleration separately, in g
        force = (_columns(frame, MOTIONSENSE_GRAVITY, path) + _columns(frame, MOTIONSENSE_USER_ACC, path)) * GRAVITY
        values = np.hstack([force, _columns(frame, MOTIONSENSE_GYRO, path)])
        return LabeledStream(values, np.full(values.shape[0], label), subject, MOTIONSENSE_RATE, source=str(path))

    streams, rejected = _finite_streams("motionsense", _parse_all(items, parse))
    return Recordings(
        name="motionsense",
        rate_hz=MOTIONSENSE_RATE,
        classes=MOTIONSENSE_CLASSES,
        streams=streams,
        provenance={"root": str(root), "files": len(items), "rejected_rows": rejected},
    )


# ---------------------------------------------------------------------------
# UCI-HAR
# ---------------------------------------------------------------------------

UCI_HAR_CLASSES = ("walking", "stairs down", "stairs up", "sitting", "standing", "laying")
UCI_HAR_RATE = 50
# published activity ids: 1 walking, 2 upstairs, 3 downstairs, 4 sitting, 5 standing, 6 laying
UCI_HAR_LABELS = {1: 0, 2: 2, 3: 1, 4: 3, 5: 4, 6: 5}
UCI_HAR_SIGNALS = ("total_acc_x", "total_acc_y", "total_acc_z", "body_gyro_x", "body_gyro_y", "body_gyro_z")


def _uci_base(root: Path) -> Path:
    nested = root / "UCI HAR Dataset"
    return nested if nested.is_dir() else root


def _read_matrix(path: Path) -> np.ndarray:
    if not path.is_file():
        raise IngestionError("missing file", path=str(path))
    frame = _read_table(path, sep=r"\s+", header=None)
    try:
        return frame.to_numpy(dtype=np.float64)
    except ValueError as exc:
        raise IngestionError("non-numeric values", path=str(path)) from exc


def _uci_split_streams(base: Path, split: str) -> List[LabeledStream]:
    folder = base / split / "Inertial Signals"
    paths = [folder / f"{signal}_{split}.txt" for signal in UCI_HAR_SIGNALS]
    channels = _parse_all(paths, _read_matrix)
    for path, matrix in zip(paths[1:], channels[1:]):
        if matrix.shape != channels[0].shape:
            raise IngestionError(
                f"signal matrix has shape {matrix.shape}, {paths[0].name} has {channels[0].shape}", path=str(path)
            )
    windows = np.stack(channels, axis=2)  # (N, 128, 6)
    windows[:, :, :3] *= GRAVITY
    activity = _read_matrix(base / split / f"y_{split}.txt")[:, 0].astype(int)
    subjects = _read_matrix(base / split / f"subject_{split}.txt")[:, 0].astype(int)
    if not (windows.shape[0] == activity.shape[0] == subjects.shape[0]):
        raise IngestionError(f"UCI-HAR {split} signal, label and subject files disagree in length", path=str(folder))
    unknown = sorted(set(activity) - set(UCI_HAR_LABELS))
    if unknown:
        raise IngestionError(f"unknown UCI-HAR activity ids {unknown}", path=str(base / split))
    labels = np.vectorize(UCI_HAR_LABELS.get)(activity) if activity.size else activity
    return deoverlap_windows(windows, labels, subjects, UCI_HAR_RATE, source=f"{base}/{split}")


def deoverlap_windows(
    windows: np.ndarray, labels: np.ndarray, subjects: np.ndarray, rate_hz: int, source: str = ""
) -> List[LabeledStream]:
    """Rebuild per-subject streams from 50%-overlapping fixed windows.

    Each window contributes its first half; the last window of a subject run contributes all of it.
    """
    streams: List[LabeledStream] = []
    if windows.shape[0] == 0:
        return streams
    half = windows.shape[1] // 2
    run_starts = np.flatnonzero(np.r_[True, subjects[1:] != subjects[:-1]])
    run_stops = np.r_[run_starts[1:], subjects.shape[0]]
    for start, stop in zip(run_starts, run_stops):
        values = [windows[i, :half] for i in range(start, stop - 1)] + [windows[stop - 1]]
        sample_labels = [np.full(half, labels[i]) for i in range(start, stop - 1)]
        sample_labels.append(np.full(windows.shape[1], labels[stop - 1]))
        streams.append(
            LabeledStream(
                values=np.concatenate(values),
                labels=np.concatenate(sample_labels),
                subject=int(subjects[start]),
                rate_hz=rate_hz,
                source=f"{source}#{start}",
            )
        )
    return streams


def _uci_raw_streams(raw: Path) -> List[LabeledStream]:
    """Raw 50 Hz acc/gyro files indexed by ``labels.txt`` (exp, user, activity, start, end; 1-based)"""
    table = _read_matrix(raw / "labels.txt").astype(int)
    streams: List[LabeledStream] = []
    cache: Dict[Tuple[int, int], np.ndarray] = {}
    for exp, user, activity, first, last in table:
        if activity not in UCI_HAR_LABELS:
            continue  # postural transitions
        key = (exp, user)
        if key not in cache:
            acc_path = raw / f"acc_exp{exp:02d}_user{user:02d}.txt"
            gyro_path = raw / f"gyro_exp{exp:02d}_user{user:02d}.txt"
            acc = _read_matrix(acc_path) * GRAVITY
            gyro = _read_matrix(gyro_path)
            if acc.shape[1] != 3:
                raise IngestionError(f"expected 3 columns, got {acc.shape[1]}", path=str(acc_path))
            if gyro.shape != acc.shape:
                raise IngestionError(
                    f"shape {gyro.shape} differs from {acc_path.name} {acc.shape}", path=str(gyro_path)
                )
            cache[key] = np.hstack([acc, gyro])
        values = cache[key][first - 1 : last]
        streams.append(
            LabeledStream(
                values=values,
                labels=np.full(values.shape[0], UCI_HAR_LABELS[activity]),
                subject=int(user),
                rate_hz=UCI_HAR_RATE,
                source=f"{raw}/exp{exp:02d}_user{user:02d}[{first}:{last}]",
            )
        )
    return streams


def read_uci_har(root: PathLike) -> Recordings:
    root = _require_dir(root, "UCI-HAR")
    base = _uci_base(root)
    raw = base / "RawData"
    if (raw / "labels.txt").is_file():
        streams = _uci_raw_streams(raw)
        layout = "raw"
    else:
        if not (base / "train" / "Inertial Signals").is_dir():
            raise IngestionError("no UCI-HAR 'train/Inertial Signals' or 'RawData' directory found", path=str(root))
        streams = _uci_split_streams(base, "train") + _uci_split_streams(base, "test")
        layout = "inertial_signals"
    streams, rejected = _finite_streams("uci_har", streams)
    if not streams:
        raise IngestionError("UCI-HAR layout holds no recordings", path=str(root))
    return Recordings(
        name="uci_har",
        rate_hz=UCI_HAR_RATE,
        classes=UCI_HAR_CLASSES,
        streams=streams,
        provenance={"root": str(root), "layout": layout, "rejected_rows": rejected},
    )


# ---------------------------------------------------------------------------
# USC-SIPI (USC-HAD)
# ---------------------------------------------------------------------------

USC_SIPI_CLASSES = ("walking", "running", "jumping", "sitting", "standing")
USC_SIPI_RATE = 100
# 1-3 walking forward/left/right, 6 running forward, 7 jumping up, 8 sitting, 9 standing
USC_SIPI_LABELS = {1: 0, 2: 0, 3: 0, 6: 1, 7: 2, 8: 3, 9: 4}
# 4-5 stairs, 10 sleeping, 11-12 elevator
USC_SIPI_EXCLUDED = {4, 5, 10, 11, 12}


def read_usc_sipi(root: PathLike) -> Recordings:
    root = _require_dir(root, "USC-SIPI")
    base = root / "USC-HAD" if (root / "USC-HAD").is_dir() else root
    items: List[Tuple[Path, int, int]] = []
    excluded = 0
    for folder in sorted(p for p in base.iterdir() if p.is_dir()):
        match = re.fullmatch(r"Subject(\d+)", folder.name)
        if not match:
            continue
        subject = int(match.group(1))
        for path in sorted(folder.glob("a*t*.mat")):
            name = re.fullmatch(r"a(\d+)t(\d+)\.mat", path.name)
            if not name:
                raise IngestionError("unexpected USC-SIPI file name", path=str(path))
            activity = int(name.group(1))
            if activity in USC_SIPI_EXCLUDED:
                excluded += 1
                continue
            if activity not in USC_SIPI_LABELS:
                raise IngestionError(f"unknown USC-SIPI activity {activity}", path=str(path))
            items.append((path, subject, USC_SIPI_LABELS[activity]))
    if not items:
        raise IngestionError("no USC-SIPI recordings (Subject<n>/a<act>t<trial>.mat) found", path=str(root))

    def parse(item: Tuple[Path, int, int]) -> LabeledStream:
        path, subject, label = item
        try:
            readings = np.asarray(loadmat(str(path))["sensor_readings"], dtype=np.float64)
        except Exception as exc:  # loadmat raises assorted types on corrupt files
            raise IngestionError(f"cannot read sensor_readings: {exc}", path=str(path)) from exc
        if readings.ndim != 2 or readings.shape[1] != 6:
            raise IngestionError(f"sensor_readings has shape {readings.shape}, expected (N, 6)", path=str(path))
        values = np.hstack([readings[:, :3] * GRAVITY, readings[:, 3:] * DEG_TO_RAD])
        return LabeledStream(values, np.full(values.shape[0], label), subject, USC_SIPI_RATE, source=str(path))

    streams, rejected = _finite_streams("usc_sipi", _parse_all(items, parse))
    logger.debug("USC-SIPI: %d trials kept, %d excluded activities", len(items), excluded)
    return Recordings(
        name="usc_sipi",
        rate_hz=USC_SIPI_RATE,
        classes=USC_SIPI_CLASSES,
        streams=streams,
        provenance={"root": str(root), "files": len(items), "excluded_files": excluded, "rejected_rows": rejected},
    )


READERS: Dict[str, Callable[[PathLike], Recordings]] = {
    "ridi": read_ridi,
    "motionsense": read_motionsense,
    "uci_har": read_uci_har,
    "usc_sipi": read_usc_sipi,
}


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def _ceil_fraction(fraction: float, count: int) -> int:
    return math.ceil(round(fraction * count, 9))


def split_subjects(draft: DatasetDraft, test_fraction: float, seed: int) -> Dataset:
    """Seeded subject-wise split: ``ceil(test_fraction * subjects)`` subjects go to test"""
    subjects = draft.subjects
    if len(subjects) < 2:
        raise SplitError(f"dataset {draft.name} has {len(subjects)} subject(s); a subject-wise split needs 2")
    if not 0 < test_fraction < 1:
        raise SplitError(f"test fraction must be in (0, 1), got {test_fraction}")
    order = np.random.default_rng(seed).permutation(len(subjects))
    n_test = min(max(_ceil_fraction(test_fraction, len(subjects)), 1), len(subjects) - 1)
    test_subjects = {subjects[i] for i in order[:n_test]}
    provenance = dict(draft.provenance, test_subjects=sorted(test_subjects), split_seed=seed)
    return Dataset(
        name=draft.name,
        rate_hz=draft.rate_hz,
        classes=tuple(draft.classes),
        train=[w for w in draft.windows if w.subject not in test_subjects],
        test=[w for w in draft.windows if w.subject in test_subjects],
        provenance=provenance,
    )


def select_subjects(draft: DatasetDraft, fraction: float, seed: int) -> DatasetDraft:
    """Keep a seeded subset of subjects (desk-scale runs); at least two survive"""
    subjects = draft.subjects
    keep_count = max(2, _ceil_fraction(fraction, len(subjects)))
    if keep_count >= len(subjects):
        return draft
    order = np.random.default_rng(seed + 1).permutation(len(subjects))
    keep = {subjects[i] for i in order[:keep_count]}
    return DatasetDraft(
        name=draft.name,
        rate_hz=draft.rate_hz,
        classes=draft.classes,
        windows=[w for w in draft.windows if w.subject in keep],
        provenance=dict(draft.provenance, subject_subset=sorted(keep)),
    )


def window_recordings(
    recordings: Recordings,
    win_len: int,
    stride: Optional[int] = None,
    denoise: Optional[MaSpec] = None,
) -> DatasetDraft:
    """Denoise streams (optional) and cut them into label-homogeneous windows"""
    stride = stride or win_len
    streams = recordings.streams
    if denoise is not None:
        too_short = [s for s in streams if len(s) < denoise.n]
        if too_short:
            logger.debug("%s: %d streams shorter than MA window %d skipped", recordings.name, len(too_short), denoise.n)
        streams = [denoise_stream(s, denoise) for s in streams if len(s) >= denoise.n]
    # float32 is what the dataset cache stores, so cached and fresh loads are identical
    windows = [
        w.with_samples(w.samples.astype(np.float32)) for s in streams for w in segment_stream(s, win_len, stride)
    ]
    if not windows:
        raise IngestionError(f"dataset {recordings.name} produced no full windows of length {win_len}")
    provenance = dict(
        recordings.provenance,
        window_length=win_len,
        stride=stride,
        moving_average=denoise.n if denoise else None,
        loader_version=LOADER_VERSION,
    )
    return DatasetDraft(recordings.name, recordings.rate_hz, list(recordings.classes), windows, provenance)


def assemble(
    recordings: Recordings,
    win_len: int,
    stride: Optional[int] = None,
    test_fraction: float = 0.2,
    seed: int = 42,
    denoise: Optional[MaSpec] = None,
    subject_fraction: float = 1.0,
) -> Dataset:
    """Denoise streams (optional), segment, subset subjects (optional) and split"""
    draft = window_recordings(recordings, win_len, stride, denoise)
    if subject_fraction < 1.0:
        draft = select_subjects(draft, subject_fraction, seed)
    dataset = split_subjects(draft, test_fraction, seed)
    logger.info(
        "%s: %d train / %d test windows (%d / %d subjects)",
        dataset.name,
        len(dataset.train),
        len(dataset.test),
        len(dataset.train_subjects),
        len(dataset.test_subjects),
    )
    return dataset


def _loader(name: str) -> Callable[..., Dataset]:
    def load(
        root: PathLike,
        win_len: Optional[int] = None,
        stride: Optional[int] = None,
        test_fraction: float = 0.2,
        seed: int = 42,
        denoise: Optional[MaSpec] = None,
        subject_fraction: float = 1.0,
    ) -> Dataset:
        settings = DatasetSettings(name=name, root=Path(root))
        return assemble(
            READERS[name](root),
            win_len or settings.resolved_window_length,
            stride,
            test_fraction=test_fraction,
            seed=seed,
            denoise=denoise,
            subject_fraction=subject_fraction,
        )

    load.__name__ = f"load_{name}"
    load.__doc__ = f"Parse, window and subject-split the {name} dataset at ``root``"
    return load


load_ridi = _loader("ridi")
load_motionsense = _loader("motionsense")
load_uci_har = _loader("uci_har")
load_usc_sipi = _loader("usc_sipi")


def cache_key(settings: DatasetSettings, split: SplitSettings, denoise: Optional[MaSpec]) -> str:
    payload = {
        "name": settings.name,
        "root": str(Path(settings.root).resolve()),
        "window_length": settings.resolved_window_length,
        "stride": settings.resolved_stride,
        "subject_fraction": settings.subject_fraction,
        "test_fraction": split.test_fraction,
        "seed": split.seed,
        "moving_average": denoise.n if denoise else None,
        "loader_version": LOADER_VERSION,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()[:16]


def load_dataset(
    settings: DatasetSettings,
    split: SplitSettings,
    denoise: Optional[MaSpec] = None,
    cache_dir: Optional[Path] = None,
    reader: Optional[Callable[[], Recordings]] = None,
) -> Dataset:
    """Load a configured dataset, reusing a binary cache file when one matches.

    ``reader`` overrides how recordings are parsed; it is only called on a cache miss.
    """
    cache_path = None
    if cache_dir is not None:
        cache_path = Path(cache_dir) / f"{settings.name}-{cache_key(settings, split, denoise)}.imuw"
        if cache_path.is_file():
            try:
                dataset = read_dataset_cache(cache_path)
                logger.info("%s: loaded cached windows from %s", settings.name, cache_path)
                return dataset
            except CacheError as exc:
                logger.warning("%s: ignoring unusable cache: %s", settings.name, exc)
    recordings = reader() if reader is not None else READERS[settings.name](settings.root)
    dataset = assemble(
        recordings,
        settings.resolved_window_length,
        settings.resolved_stride,
        test_fraction=split.test_fraction,
        seed=split.seed,
        denoise=denoise,
        subject_fraction=settings.subject_fraction,
    )
    if cache_path is not None:
        write_dataset_cache(cache_path, dataset)
    return dataset


def _class_minutes(counts: Dict[int, float], classes: Sequence[str]) -> pd.DataFrame:
    rows = [{"class": name, "minutes": counts.get(i, 0.0) / 60.0} for i, name in enumerate(classes)]
    return pd.DataFrame(rows, columns=["class", "minutes"])


def summarize_windows(windows: Sequence[Window], rate_hz: int, classes: Sequence[str]) -> pd.DataFrame:
    seconds: Dict[int, float] = {}
    for w in windows:
        seconds[w.label] = seconds.get(w.label, 0.0) + w.length / rate_hz
    return _class_minutes(seconds, classes)


def summarize(dataset: Dataset) -> pd.DataFrame:
    """Minutes of windowed data per class (train and test together), one row per class"""
    return summarize_windows([*dataset.train, *dataset.test], dataset.rate_hz, dataset.classes)


def summarize_recordings(recordings: Recordings) -> pd.DataFrame:
    """Minutes of recorded data per class before windowing"""
    seconds: Dict[int, float] = {}
    for stream in recordings.streams:
        labels, counts = np.unique(stream.labels, return_counts=True)
        for label, count in zip(labels.tolist(), counts.tolist()):
            seconds[label] = seconds.get(label, 0.0) + count / recordings.rate_hz
    return _class_minutes(seconds, recordings.classes)
