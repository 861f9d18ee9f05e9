"""Pydantic schemas for the experiment configuration file"""
from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

DatasetName = Literal["ridi", "motionsense", "uci_har", "usc_sipi"]
DATASET_NAMES = ("ridi", "motionsense", "uci_har", "usc_sipi")

# 2 s of samples at each dataset's native rate
DEFAULT_WINDOW_LENGTH: Dict[str, int] = {"ridi": 400, "motionsense": 100, "uci_har": 100, "usc_sipi": 200}
DEFAULT_EPOCHS: Dict[str, int] = {"ridi": 30, "motionsense": 30, "uci_har": 50, "usc_sipi": 30}

TECHNIQUE_IDS = (
    "baseline",
    "head2",
    "head3",
    "rot_x",
    "rot_y",
    "rot_z",
    "rot_all",
    "noise",
    "ma10",
    "ma25",
    "ma50",
)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DatasetSettings(_Section):
    """One dataset section; unset fields fall back to the per-dataset defaults"""

    name: DatasetName
    root: Path
    window_length: Optional[int] = Field(default=None, ge=1)
    stride: Optional[int] = Field(default=None, ge=1)
    epochs: Optional[int] = Field(default=None, ge=1)
    noise_fraction: Optional[float] = Field(default=None, gt=0)
    subject_fraction: float = Field(default=1.0, gt=0, le=1)

    @property
    def resolved_window_length(self) -> int:
        return self.window_length or DEFAULT_WINDOW_LENGTH[self.name]

    @property
    def resolved_stride(self) -> int:
        return self.stride or self.resolved_window_length

    @property
    def resolved_epochs(self) -> int:
        return self.epochs or DEFAULT_EPOCHS[self.name]


class SplitSettings(_Section):
    test_fraction: float = Field(default=0.2, gt=0, lt=1)
    seed: int = 42


class NetworkSettings(_Section):
    filters: int = Field(default=64, ge=1)
    kernel: int = Field(default=5, ge=1)
    pool: int = Field(default=3, ge=1)
    hidden: int = Field(default=128, ge=1)
    dropout: float = Field(default=0.25, ge=0, lt=1)
    fc_width: int = Field(default=256, ge=1)
    reduction: Literal["last", "mean"] = "last"
    fc_activation: Literal["none", "relu"] = "none"


class TrainingSettings(_Section):
    learning_rate: float = Field(default=0.001, gt=0)
    batch_size: int = Field(default=64, ge=1)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    eval_every: int = Field(default=1, ge=1)
    debug: bool = False


class AugmentationSettings(_Section):
    noise_fraction: float = Field(default=0.05, gt=0)


class BenchmarkConfig(_Section):
    """Root of the experiment configuration file"""

    datasets: List[DatasetSettings]
    techniques: List[str] = Field(default_factory=lambda: list(TECHNIQUE_IDS))
    seeds: List[int] = Field(default_factory=lambda: [0])
    output_dir: Path = Path("results")
    cache_dir: Optional[Path] = None
    workers: int = Field(default=1, ge=1)
    log_level: str = "INFO"
    # reserved for technique combinations; only single techniques run in this version
    combinations: List[List[str]] = Field(default_factory=list)
    split: SplitSettings = Field(default_factory=SplitSettings)
    network: NetworkSettings = Field(default_factory=NetworkSettings)
    training: TrainingSettings = Field(default_factory=TrainingSettings)
    augmentation: AugmentationSettings = Field(default_factory=AugmentationSettings)

    @field_validator("techniques")
    @classmethod
    def _known_techniques(cls, value: List[str]) -> List[str]:
        unknown = [t for t in value if t not in TECHNIQUE_IDS]
        if unknown:
            raise ValueError(f"unknown techniques {unknown}; expected a subset of {list(TECHNIQUE_IDS)}")
        return value

    @field_validator("seeds")
    @classmethod
    def _some_seed(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one seed is required")
        return value

    @model_validator(mode="after")
    def _checks(self) -> "BenchmarkConfig":
        if self.combinations:
            raise ValueError("technique combinations are reserved and not supported yet")
        names = [d.name for d in self.datasets]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate dataset sections: {names}")
        return self

    def dataset(self, name: str) -> DatasetSettings:
        for entry in self.datasets:
            if entry.name == name:
                return entry
        raise KeyError(name)
