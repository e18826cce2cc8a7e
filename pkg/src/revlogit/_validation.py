"""Input checks shared by the estimator, reporting and CLI layers."""
from __future__ import annotations

from collections.abc import Mapping
from os import PathLike

from .config import ModelConfig, load_config
from .data import Dataset


def check_dataset(X) -> Dataset:
    """Return ``X`` if it is a :class:`Dataset`, else raise ``TypeError``."""
    if not isinstance(X, Dataset):
        raise TypeError(f"expected a revlogit Dataset, got {type(X).__name__}; use load_dataset to read CSV files")
    if X.ratings.empty:
        raise ValueError("dataset has no ratings")
    return X


def resolve_config(config) -> ModelConfig:
    """Accept a ModelConfig, a mapping in the YAML layout, a YAML path or ``None``."""
    if config is None:
        return ModelConfig()
    if isinstance(config, ModelConfig):
        return config
    if isinstance(config, Mapping):
        return ModelConfig.from_dict(config)
    if isinstance(config, (str, PathLike)):
        return load_config(config)
    raise TypeError(f"cannot interpret {type(config).__name__} as a model configuration")


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
