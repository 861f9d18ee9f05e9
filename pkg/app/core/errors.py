"""Error hierarchy for the benchmark harness.

Every error carries the exit code the command line reports when it escapes.
"""
from typing import Optional


class BenchmarkError(Exception):
    """Base class for all harness errors"""

    exit_code: int = 1

    def __init__(self, message: str, *, path: Optional[str] = None):
        self.path = path
        if path:
            message = f"{message} ({path})"
        super().__init__(message)


class ConfigError(BenchmarkError):
    """Invalid or unreadable experiment configuration"""

    exit_code = 1


class DatasetError(BenchmarkError):
    """A dataset could not be loaded, split or cached"""

    exit_code = 2


class IngestionError(DatasetError):
    """A dataset file is missing, garbled or carries an unknown tag"""


class SplitError(DatasetError):
    """Subject-wise split is impossible for the given dataset"""


class CacheError(DatasetError):
    """A binary container has the wrong magic, version or layout"""


class SignalError(BenchmarkError):
    """Invalid inertial signal for the requested operation"""

    exit_code = 2


class DegenerateChannelError(SignalError):
    """A channel has zero variance over the training split"""

    def __init__(self, channel: int, message: Optional[str] = None):
        self.channel = channel
        super().__init__(message or f"channel {channel} has zero variance in the training split")


class PreprocessingError(SignalError):
    """A signal is too short for the requested filter"""


class ShapeError(BenchmarkError):
    """Tensor shapes do not match an operator's contract"""

    exit_code = 3


class UsageError(BenchmarkError):
    """A backend object was used out of order (e.g. backward before forward)"""

    exit_code = 3


class SpecError(BenchmarkError):
    """Invalid model specification"""

    exit_code = 1


class TrainingError(BenchmarkError):
    """Training could not complete (empty data, non-finite loss)"""

    exit_code = 3


class ReportError(BenchmarkError):
    """Results cannot be turned into a report"""

    exit_code = 1
