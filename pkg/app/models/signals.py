"""Inertial signal data models: samples, streams, windows, statistics and datasets.

Channel order everywhere is ``[fx, fy, fz, wx, wy, wz]``: specific force in m/s^2
followed by angular rate in rad/s.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from app.core.errors import DatasetError, SignalError

N_CHANNELS = 6
CHANNEL_NAMES: Tuple[str, ...] = ("fx", "fy", "fz", "wx", "wy", "wz")
SUPPORTED_RATES = (50, 100, 200)


@dataclass(frozen=True)
class ImuSample:
    """One 6-axis inertial reading at time index ``t``"""

    f: Tuple[float, float, float]
    w: Tuple[float, float, float]
    t: int

    def __post_init__(self) -> None:
        if len(self.f) != 3 or len(self.w) != 3:
            raise SignalError("an IMU sample needs two 3-vectors")
        if not np.all(np.isfinite(self.f)) or not np.all(np.isfinite(self.w)):
            raise SignalError(f"non-finite IMU sample at t={self.t}")

    def as_array(self) -> np.ndarray:
        return np.asarray((*self.f, *self.w), dtype=np.float64)


@dataclass(frozen=True)
class LabeledStream:
    """A contiguous, time-ordered recording of one subject with a label per sample"""

    values: np.ndarray
    labels: np.ndarray
    subject: int
    rate_hz: int
    source: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if values.ndim != 2 or values.shape[1] != N_CHANNELS:
            raise SignalError(f"stream values must be (N, {N_CHANNELS}), got {values.shape}")
        if labels.shape != (values.shape[0],):
            raise SignalError(f"stream has {values.shape[0]} samples but {labels.shape[0]} labels")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @classmethod
    def from_samples(
        cls, samples: Sequence[ImuSample], labels: Sequence[int], subject: int, rate_hz: int, source: str = ""
    ) -> "LabeledStream":
        values = np.stack([s.as_array() for s in samples]) if samples else np.zeros((0, N_CHANNELS))
        return cls(values=values, labels=np.asarray(labels), subject=subject, rate_hz=rate_hz, source=source)

    def samples(self) -> List[ImuSample]:
        return [
            ImuSample(f=tuple(row[:3]), w=tuple(row[3:]), t=t)
            for t, row in enumerate(self.values.tolist())
        ]


@dataclass(frozen=True)
class Window:
    """Fixed-length slice of a stream with a single activity label; the unit of classification"""

    samples: np.ndarray
    label: int
    subject: int
    rate_hz: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples)
        if samples.ndim != 2 or samples.shape[1] != N_CHANNELS:
            raise SignalError(f"window samples must be (L, {N_CHANNELS}), got {samples.shape}")
        object.__setattr__(self, "samples", samples)

    @property
    def length(self) -> int:
        return int(self.samples.shape[0])

    def with_samples(self, samples: np.ndarray) -> "Window":
        return Window(samples=samples, label=self.label, subject=self.subject, rate_hz=self.rate_hz)


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel mean and population standard deviation of a training split"""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != (N_CHANNELS,) or std.shape != (N_CHANNELS,):
            raise SignalError("channel statistics must be 6-vectors")
        if not np.all(std > 0):
            raise SignalError("channel statistics need strictly positive std")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)


@dataclass
class DatasetDraft:
    """Windows of a dataset before the subject-wise train/test split"""

    name: str
    rate_hz: int
    classes: List[str]
    windows: List[Window]
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def subjects(self) -> List[int]:
        return sorted({w.subject for w in self.windows})


@dataclass(frozen=True)
class Dataset:
    """Labelled train/test windows of one public dataset plus metadata"""

    name: str
    rate_hz: int
    classes: Tuple[str, ...]
    train: Tuple[Window, ...]
    test: Tuple[Window, ...]
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "test", tuple(self.test))
        self.validate()

    def validate(self) -> None:
        if self.rate_hz not in SUPPORTED_RATES:
            raise DatasetError(f"dataset {self.name}: unsupported sampling rate {self.rate_hz} Hz")
        n_classes = len(self.classes)
        for split_name, windows in (("train", self.train), ("test", self.test)):
            for w in windows:
                if not 0 <= w.label < n_classes:
                    raise DatasetError(
                        f"dataset {self.name}: {split_name} window label {w.label} outside {n_classes} classes"
                    )
        overlap = self.train_subjects & self.test_subjects
        if overlap:
            raise DatasetError(f"dataset {self.name}: subjects {sorted(overlap)} appear in train and test")

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def train_subjects(self) -> set:
        return {w.subject for w in self.train}

    @property
    def test_subjects(self) -> set:
        return {w.subject for w in self.test}

    @property
    def window_length(self) -> int:
        windows = self.train or self.test
        return windows[0].length if windows else 0

    def replace(self, **changes: Any) -> "Dataset":
        fields = dict(
            name=self.name,
            rate_hz=self.rate_hz,
            classes=self.classes,
            train=self.train,
            test=self.test,
            provenance=self.provenance,
        )
        fields.update(changes)
        return Dataset(**fields)
