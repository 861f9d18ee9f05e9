"""Stream segmentation into labelled windows and per-channel z-score normalization"""
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.core.errors import DegenerateChannelError, SignalError
from app.core.log import get_logger
from app.models.signals import CHANNEL_NAMES, N_CHANNELS, ChannelStats, LabeledStream, Window

logger = get_logger(__name__)

# std at or below this is treated as a constant channel
_DEGENERATE_STD = 1e-12


def segment_stream(stream: LabeledStream, win_len: int, stride: int) -> List[Window]:
    """Cut a stream into full windows starting at 0, stride, 2*stride, ...

    Candidate windows spanning a label change are dropped.
    """
    if win_len < 1 or stride < 1:
        raise SignalError(f"window length and stride must be >= 1, got {win_len}/{stride}")
    n = len(stream)
    if n == 0 or win_len > n:
        return []
    starts = np.arange(0, n - win_len + 1, stride)
    label_views = sliding_window_view(stream.labels, win_len)[starts]
    homogeneous = label_views.min(axis=1) == label_views.max(axis=1)
    windows = [
        Window(
            samples=stream.values[s : s + win_len].copy(),
            label=int(stream.labels[s]),
            subject=stream.subject,
            rate_hz=stream.rate_hz,
        )
        for s in starts[homogeneous]
    ]
    dropped = int((~homogeneous).sum())
    if dropped:
        logger.debug("%s: dropped %d mixed-label windows of %d", stream.source or "stream", dropped, len(starts))
    return windows


def split_on_invalid(stream: LabeledStream) -> Tuple[List[LabeledStream], int]:
    """Split a stream at non-finite rows; returns the finite runs and the rejected row count"""
    finite = np.all(np.isfinite(stream.values), axis=1)
    rejected = int((~finite).sum())
    if rejected == 0:
        return [stream], 0
    runs: List[LabeledStream] = []
    # boundaries of consecutive finite runs
    padded = np.concatenate(([False], finite, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    for start, stop in zip(edges[::2], edges[1::2]):
        runs.append(
            LabeledStream(
                values=stream.values[start:stop],
                labels=stream.labels[start:stop],
                subject=stream.subject,
                rate_hz=stream.rate_hz,
                source=f"{stream.source}[{start}:{stop}]",
            )
        )
    return runs, rejected


def fit_stats(train_windows: Sequence[Window]) -> ChannelStats:
    """Per-channel mean and population std over every sample of the training windows"""
    if len(train_windows) == 0:
        raise SignalError("cannot fit channel statistics on an empty training split")
    stacked = np.concatenate([np.asarray(w.samples, dtype=np.float64) for w in train_windows], axis=0)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    for channel in range(N_CHANNELS):
        if not std[channel] > _DEGENERATE_STD:
            raise DegenerateChannelError(
                channel, f"channel {CHANNEL_NAMES[channel]} has zero variance in the training split"
            )
    return ChannelStats(mean=mean, std=std)


def normalize(window: Window, stats: ChannelStats) -> Window:
    scaled = (np.asarray(window.samples, dtype=np.float64) - stats.mean) / stats.std
    return window.with_samples(scaled.astype(window.samples.dtype, copy=False))


def denormalize(window: Window, stats: ChannelStats) -> Window:
    restored = np.asarray(window.samples, dtype=np.float64) * stats.std + stats.mean
    return window.with_samples(restored.astype(window.samples.dtype, copy=False))


def normalize_all(windows: Iterable[Window], stats: ChannelStats) -> List[Window]:
    return [normalize(w, stats) for w in windows]


def stack_windows(windows: Sequence[Window], dtype=np.float32) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack windows into ``(N, L, 6)`` values plus label and subject vectors"""
    if len(windows) == 0:
        return np.zeros((0, 0, N_CHANNELS), dtype=dtype), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    values = np.stack([w.samples for w in windows]).astype(dtype, copy=False)
    labels = np.fromiter((w.label for w in windows), dtype=np.int64, count=len(windows))
    subjects = np.fromiter((w.subject for w in windows), dtype=np.int64, count=len(windows))
    return values, labels, subjects
