"""Training-set augmentation by fixed sensor-frame rotations and additive Gaussian noise"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence

import numpy as np

from app.core.errors import SignalError
from app.core.log import get_logger
from app.models.signals import ChannelStats, Window

logger = get_logger(__name__)

ROTATION_ANGLE = math.pi / 6


class RotationAxis(str, Enum):
    X = "X"
    Y = "Y"
    Z = "Z"
    ALL = "ALL"


def rotation_matrix(axis: RotationAxis) -> np.ndarray:
    """The fixed pi/6 rotation about a single axis"""
    axis = RotationAxis(axis)
    c, s = math.cos(ROTATION_ANGLE), math.sin(ROTATION_ANGLE)
    if axis is RotationAxis.X:
        return np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])
    if axis is RotationAxis.Y:
        return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])
    if axis is RotationAxis.Z:
        return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    raise SignalError("RotationAxis.ALL is not a single rotation; expand it into X, Y and Z")


def _expand(axis: RotationAxis) -> List[RotationAxis]:
    axis = RotationAxis(axis)
    if axis is RotationAxis.ALL:
        return [RotationAxis.X, RotationAxis.Y, RotationAxis.Z]
    return [axis]


def rotate_window(window: Window, T: np.ndarray) -> Window:
    """Apply the same rotation to the accelerometer and gyroscope triads of every sample"""
    T = np.asarray(T, dtype=np.float64)
    if T.shape != (3, 3):
        raise SignalError(f"rotation must be 3x3, got {T.shape}")
    samples = np.asarray(window.samples, dtype=np.float64)
    triads = samples.reshape(samples.shape[0], 2, 3)
    rotated = triads @ T.T
    return window.with_samples(rotated.reshape(samples.shape).astype(window.samples.dtype, copy=False))


def augment_rotation(train: Sequence[Window], axis: RotationAxis) -> List[Window]:
    """Originals followed by one rotated copy per axis (three copies for ALL)"""
    if len(train) == 0:
        raise SignalError("cannot augment an empty training split")
    out = list(train)
    for single in _expand(axis):
        T = rotation_matrix(single)
        out.extend(rotate_window(w, T) for w in train)
    logger.debug("rotation %s: %d -> %d training windows", RotationAxis(axis).value, len(train), len(out))
    return out


@dataclass(frozen=True)
class NoiseSpec:
    """Noise std per channel is ``fraction`` times the training std of that channel"""

    fraction: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.fraction > 0:
            raise SignalError(f"noise fraction must be positive, got {self.fraction}")

    def sigma(self, stats: ChannelStats) -> np.ndarray:
        return self.fraction * stats.std


def _window_rng(seed: int, index: int) -> np.random.Generator:
    # counter-based stream per window index: serial and parallel runs draw identical noise
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, index]))


def augment_noise(train: Sequence[Window], spec: NoiseSpec, stats: ChannelStats) -> List[Window]:
    """Originals followed by one noisy copy per original"""
    if len(train) == 0:
        raise SignalError("cannot augment an empty training split")
    sigma = spec.sigma(stats)
    noisy = []
    for index, w in enumerate(train):
        rng = _window_rng(spec.seed, index)
        samples = np.asarray(w.samples, dtype=np.float64)
        noise = rng.standard_normal(samples.shape) * sigma
        noisy.append(w.with_samples((samples + noise).astype(w.samples.dtype, copy=False)))
    return list(train) + noisy
