"""Tensor-train density estimation."""

from ._ttde import (
    BSplineBasis,
    DensityModel,
    NumericError,
    TrainConfig,
    Variant,
    checkerboard,
    conditional_cdf,
    corner_mixture,
    cross_entropy,
    sample,
    sliced_tv,
    train,
    two_moons,
)

__all__ = [
    "BSplineBasis",
    "DensityModel",
    "NumericError",
    "TrainConfig",
    "Variant",
    "checkerboard",
    "conditional_cdf",
    "corner_mixture",
    "cross_entropy",
    "sample",
    "sliced_tv",
    "train",
    "two_moons",
]
