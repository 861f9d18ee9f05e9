"""Experiment-level models: techniques, model specs, training config, plans and results"""
import hashlib
import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from app.core.errors import SpecError
from app.models.settings import (
    TECHNIQUE_IDS,
    AugmentationSettings,
    DatasetSettings,
    NetworkSettings,
    SplitSettings,
    TrainingSettings,
)
from app.models.signals import N_CHANNELS


class TechniqueId(str, Enum):
    BASELINE = "baseline"
    HEAD2 = "head2"
    HEAD3 = "head3"
    ROT_X = "rot_x"
    ROT_Y = "rot_y"
    ROT_Z = "rot_z"
    ROT_ALL = "rot_all"
    NOISE = "noise"
    MA10 = "ma10"
    MA25 = "ma25"
    MA50 = "ma50"

    @property
    def variant(self) -> str:
        if self in (TechniqueId.HEAD2, TechniqueId.HEAD3):
            return self.value
        return "baseline"

    @property
    def rotation_axis(self) -> Optional[str]:
        if self.value.startswith("rot_"):
            return self.value[4:].upper()
        return None

    @property
    def moving_average(self) -> Optional[int]:
        if self.value.startswith("ma"):
            return int(self.value[2:])
        return None


assert tuple(t.value for t in TechniqueId) == TECHNIQUE_IDS

# channel indices: fx fy fz wx wy wz
HEAD_LAYOUTS: Dict[str, Tuple[Tuple[int, ...], ...]] = {
    "baseline": ((0, 1, 2, 3, 4, 5),),
    "head2": ((0, 1, 2), (3, 4, 5)),
    "head3": ((0, 3), (1, 4), (2, 5)),
}


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description of a baseline or multi-head classifier"""

    variant: str
    heads: Tuple[Tuple[int, ...], ...]
    n_classes: int
    hidden: int = 128
    filters: int = 64
    kernel: int = 5
    pool: int = 3
    fc_width: int = 256
    dropout: float = 0.25
    reduction: str = "last"
    fc_activation: str = "none"

    def __post_init__(self) -> None:
        self.validate()

    @classmethod
    def for_variant(cls, variant: str, n_classes: int, **hyper: Any) -> "ModelSpec":
        if variant not in HEAD_LAYOUTS:
            raise SpecError(f"unknown model variant {variant!r}")
        return cls(variant=variant, heads=HEAD_LAYOUTS[variant], n_classes=n_classes, **hyper)

    def validate(self) -> None:
        if self.n_classes < 2:
            raise SpecError(f"need at least 2 classes, got {self.n_classes}")
        if not self.heads or any(len(h) == 0 for h in self.heads):
            raise SpecError("every head needs at least one input channel")
        flat = [c for head in self.heads for c in head]
        if sorted(flat) != list(range(N_CHANNELS)):
            raise SpecError(f"heads {self.heads} do not partition the {N_CHANNELS} inertial channels")
        if min(self.hidden, self.filters, self.kernel, self.pool, self.fc_width) < 1:
            raise SpecError("layer sizes must be positive")
        if not 0 <= self.dropout < 1:
            raise SpecError(f"dropout rate {self.dropout} outside [0, 1)")
        if self.reduction not in ("last", "mean"):
            raise SpecError(f"unknown temporal reduction {self.reduction!r}")
        if self.fc_activation not in ("none", "relu"):
            raise SpecError(f"unknown dense activation {self.fc_activation!r}")

    def spec_hash(self) -> bytes:
        payload = json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).digest()


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 64
    epochs: int = 10
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    eval_every: int = 1
    debug: bool = False

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.epochs < 1 or self.eval_every < 1:
            raise SpecError("batch size, epochs and eval cadence must be at least 1")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    test_acc: Optional[float]
    wall_ms: float


@dataclass
class TrainingLog:
    records: List[EpochRecord] = field(default_factory=list)

    @property
    def final_accuracy(self) -> Optional[float]:
        evaluated = [r.test_acc for r in self.records if r.test_acc is not None]
        return evaluated[-1] if evaluated else None

    @property
    def best(self) -> Tuple[Optional[int], Optional[float]]:
        evaluated = [r for r in self.records if r.test_acc is not None]
        if not evaluated:
            return None, None
        top = max(evaluated, key=lambda r: (r.test_acc, -r.epoch))
        return top.epoch, top.test_acc

    @property
    def losses(self) -> List[float]:
        return [r.train_loss for r in self.records]


class RunResult(BaseModel):
    """Outcome of one (dataset, technique, seed) run"""

    model_config = ConfigDict(frozen=True)

    dataset: str
    technique: str
    seed: int
    status: str = "ok"
    accuracy: Optional[float] = Field(default=None, ge=0, le=100)
    baseline_accuracy: Optional[float] = Field(default=None, ge=0, le=100)
    delta: Optional[float] = None
    best_accuracy: Optional[float] = None
    best_epoch: Optional[int] = None
    parameter_count: Optional[int] = None
    wall_time_s: Optional[float] = Field(default=None, exclude=True)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def with_baseline(self, baseline_accuracy: float) -> "RunResult":
        return self.model_copy(
            update={"baseline_accuracy": baseline_accuracy, "delta": self.accuracy - baseline_accuracy}
        )


class ExperimentPlan(BaseModel):
    """Which techniques run on which datasets with which seeds"""

    model_config = ConfigDict(frozen=True)

    datasets: List[DatasetSettings]
    techniques: List[TechniqueId]
    seeds: List[int]
    output_dir: Path
    cache_dir: Optional[Path] = None
    workers: int = 1
    split: SplitSettings = Field(default_factory=SplitSettings)
    network: NetworkSettings = Field(default_factory=NetworkSettings)
    training: TrainingSettings = Field(default_factory=TrainingSettings)
    augmentation: AugmentationSettings = Field(default_factory=AugmentationSettings)
    combinations: List[List[TechniqueId]] = Field(default_factory=list)

    def ordered_techniques(self) -> List[TechniqueId]:
        """Baseline first so deltas are computable, remaining ids in canonical order"""
        wanted = set(self.techniques) | {TechniqueId.BASELINE}
        return [t for t in TechniqueId if t in wanted]
