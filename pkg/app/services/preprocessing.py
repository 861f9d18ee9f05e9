"""Moving-average denoising of inertial streams"""
from dataclasses import dataclass

import numpy as np

from app.core.errors import PreprocessingError
from app.core.log import get_logger
from app.models.signals import LabeledStream

logger = get_logger(__name__)

MA_WINDOW_SIZES = (10, 25, 50)


@dataclass(frozen=True)
class MaSpec:
    """Moving-average window size in samples"""

    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise PreprocessingError(f"moving-average window must be >= 1, got {self.n}")


def moving_average(signal: np.ndarray, n: int) -> np.ndarray:
    """Forward-window mean: ``out[t] = mean(signal[t : t + n])`` for ``t`` in ``0 .. L - n``

    Works along the first axis, so an ``(L, C)`` array filters every column.
    Computed with a running sum; the output is shortened, never padded.
    """
    if n < 1:
        raise PreprocessingError(f"moving-average window must be >= 1, got {n}")
    x = np.asarray(signal, dtype=np.float64)
    length = x.shape[0]
    if n > length:
        raise PreprocessingError(f"signal of length {length} is shorter than the moving-average window {n}")
    if n == 1:
        return x.copy()
    running = np.cumsum(x, axis=0)
    out = np.empty((length - n + 1,) + x.shape[1:], dtype=np.float64)
    out[0] = running[n - 1]
    out[1:] = running[n:] - running[:-n]
    return out / n


def denoise_stream(stream: LabeledStream, spec: MaSpec) -> LabeledStream:
    """Filter all six channels with the same window; label ``t`` is the label of original sample ``t``"""
    if len(stream) < spec.n:
        raise PreprocessingError(
            f"stream {stream.source or '?'} has {len(stream)} samples, fewer than the MA window {spec.n}"
        )
    filtered = moving_average(stream.values, spec.n)
    return LabeledStream(
        values=filtered,
        labels=stream.labels[: filtered.shape[0]],
        subject=stream.subject,
        rate_hz=stream.rate_hz,
        source=stream.source,
    )
