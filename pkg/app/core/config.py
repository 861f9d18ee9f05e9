"""Loading the YAML experiment configuration and narrowing it into a plan"""
from pathlib import Path
from typing import Optional, Union

import yaml
from pydantic import ValidationError

from app.core.errors import ConfigError
from app.core.log import get_logger
from app.models.experiment import ExperimentPlan, TechniqueId
from app.models.settings import BenchmarkConfig

logger = get_logger(__name__)


def load_config(path: Union[str, Path]) -> BenchmarkConfig:
    """Read and validate a benchmark configuration file"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config file not found", path=str(path))
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}", path=str(path)) from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping with a 'datasets' section", path=str(path))
    try:
        config = BenchmarkConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {exc}", path=str(path)) from exc
    logger.debug("loaded config %s with %d dataset sections", path, len(config.datasets))
    return config


def build_plan(
    config: BenchmarkConfig,
    dataset: Optional[str] = None,
    technique: Optional[str] = None,
    seed: Optional[int] = None,
) -> ExperimentPlan:
    """Narrow a configuration to the requested dataset, technique and seed"""
    datasets = list(config.datasets)
    if dataset is not None:
        datasets = [d for d in datasets if d.name == dataset]
        if not datasets:
            raise ConfigError(f"dataset {dataset!r} has no section in the config")
    techniques = [TechniqueId(t) for t in config.techniques]
    if technique is not None:
        try:
            techniques = [TechniqueId(technique)]
        except ValueError as exc:
            raise ConfigError(f"unknown technique {technique!r}") from exc
    seeds = [seed] if seed is not None else list(config.seeds)
    return ExperimentPlan(
        datasets=datasets,
        techniques=techniques,
        seeds=seeds,
        output_dir=config.output_dir,
        cache_dir=config.cache_dir,
        workers=config.workers,
        split=config.split,
        network=config.network,
        training=config.training,
        augmentation=config.augmentation,
    )
