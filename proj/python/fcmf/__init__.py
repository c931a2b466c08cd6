"""Python bindings for the fcmf multimodal aspect sentiment library."""

import json

from ._core import (
    ConfigError,
    DataError,
    DimensionError,
    IoError,
    NumericError,
    __version__,
    cohen_kappa,
    default_config_json,
    generate_synthetic,
    iou,
    macro_prf1,
    model_grad_check,
    predict,
    run_cli,
    train_json,
)


def default_config():
    return json.loads(default_config_json())


def train(data_dir, config=None, seed=1, checkpoint_dir=""):
    """Train one seed; keys missing from `config` keep their defaults."""
    return json.loads(train_json(str(data_dir), json.dumps(config or {}), seed, str(checkpoint_dir)))


__all__ = [
    "ConfigError",
    "DataError",
    "DimensionError",
    "IoError",
    "NumericError",
    "cohen_kappa",
    "default_config",
    "generate_synthetic",
    "iou",
    "macro_prf1",
    "model_grad_check",
    "predict",
    "run_cli",
    "train",
]
