"""Per-timestep loss experiments on toy diffusion models."""

import json as _json

from ._difflab import (
    ConfigError,
    DifflabError,
    IoError,
    NumericError,
    Schedule,
    StepReport,
    Trainer,
    ablate,
    compute_slots,
    default_config,
    energy_distance,
    generate_dataset,
    make_target,
    mixed_select,
    read_profile,
    recover_x0,
    run_training,
    sample,
)

__all__ = [
    "ConfigError",
    "DifflabError",
    "IoError",
    "NumericError",
    "Schedule",
    "StepReport",
    "Trainer",
    "ablate",
    "compute_slots",
    "default_config",
    "energy_distance",
    "generate_dataset",
    "make_target",
    "mixed_select",
    "read_profile",
    "recover_x0",
    "run_training",
    "sample",
    "trainer",
]


def trainer(**overrides):
    """Trainer from keyword overrides of the training config (nested dicts allowed)."""
    return Trainer(_json.dumps(overrides))
