"""Python bindings for the emflow C++ core.

Exposes dataset sampling, two-sample metrics, training/sampling entry
points and the validation primitives (spectral norms, gradcheck).
"""

from ._core import (
    ContractViolation,
    assumption_constants,
    default_config,
    energy_distance,
    estimate_spectral_norm,
    gradcheck,
    histogram_tv,
    mmd_rbf,
    power_iteration_norm,
    sample_checkpoint,
    sample_dataset,
    train,
)

__all__ = [
    "ContractViolation",
    "assumption_constants",
    "default_config",
    "energy_distance",
    "estimate_spectral_norm",
    "gradcheck",
    "histogram_tv",
    "mmd_rbf",
    "power_iteration_norm",
    "sample_checkpoint",
    "sample_dataset",
    "train",
]
