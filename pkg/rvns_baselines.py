"""
RVNS baselines
Laplace and Gaussian noise addition, compared with RVNS at matched
Euclidean privacy distance.
"""

from __future__ import annotations

import logging
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.optimize import brentq

from rvns_attack import privacy_distance
from rvns_core import DataRange, Dataset
from rvns_errors import InvalidArgumentError

logger = logging.getLogger(__name__)

Mechanism = Literal["laplace", "gaussian"]


class NoiseConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    mechanism: Mechanism = "laplace"
    scale: float = 1.0
    clip_to_range: bool = False

    @model_validator(mode="after")
    def _check_scale(self) -> "NoiseConfig":
        if not self.scale > 0:
            raise InvalidArgumentError(f"noise scale must be positive, got {self.scale}")
        return self


def _noise(config: NoiseConfig, rng: np.random.Generator, size=None):
    if config.mechanism == "laplace":
        return rng.laplace(0.0, config.scale, size=size)
    return rng.normal(0.0, config.scale, size=size)


def perturb_noise(x: float, config: NoiseConfig, data_range: DataRange, rng: np.random.Generator) -> float:
    """x plus Laplace(0, scale) or Normal(0, scale^2) noise, optionally clamped to [a, b]."""
    if not data_range.a <= x <= data_range.b:
        raise InvalidArgumentError(f"x must lie in [{data_range.a}, {data_range.b}]")
    noisy = x + float(_noise(config, rng))
    if config.clip_to_range:
        noisy = min(max(noisy, data_range.a), data_range.b)
    return noisy


def perturb_noise_batch(values, config: NoiseConfig, data_range: DataRange, rng: np.random.Generator) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if not np.all(data_range.contains(values)):
        raise InvalidArgumentError(f"values must lie in [{data_range.a}, {data_range.b}]")
    noisy = values + _noise(config, rng, size=values.shape)
    if config.clip_to_range:
        noisy = np.clip(noisy, data_range.a, data_range.b)
    return noisy


def baseline_privacy(original: Dataset, perturbed) -> float:
    """Euclidean distance between the original values and their noisy versions."""
    return privacy_distance(original, perturbed)


def expected_baseline_privacy(
    original: Dataset,
    config: NoiseConfig,
    seed: int,
    repetitions: int = 11,
) -> float:
    """Mean privacy distance over repetitions; a fixed seed gives common random numbers across scales."""
    distances = []
    for repetition in range(repetitions):
        rng = np.random.default_rng([seed, repetition])
        noisy = perturb_noise_batch(original.values, config, original.range, rng)
        distances.append(baseline_privacy(original, noisy))
    return float(np.mean(distances))


def calibrate_scale(
    original: Dataset,
    mechanism: Mechanism,
    target_distance: float,
    seed: int = 0,
    repetitions: int = 11,
    clip_to_range: bool = False,
    relative_tolerance: float = 1e-4,
) -> float:
    """
    Find the noise scale whose expected privacy distance equals target_distance.

    The distance grows with the scale, so the root is bracketed by doubling
    and refined by brentq.
    """
    if not target_distance > 0:
        raise InvalidArgumentError("target distance must be positive")

    def gap(scale: float) -> float:
        config = NoiseConfig(mechanism=mechanism, scale=scale, clip_to_range=clip_to_range)
        return expected_baseline_privacy(original, config, seed, repetitions) - target_distance

    low, high = 1e-6, 1.0
    if gap(low) > 0:
        raise InvalidArgumentError(f"distance {target_distance} is below what any {mechanism} scale gives")
    while gap(high) < 0:
        low, high = high, high * 2.0
        if high > 1e9:
            raise InvalidArgumentError(f"no {mechanism} scale reaches distance {target_distance}")
    scale = brentq(gap, low, high, rtol=relative_tolerance)
    logger.info("🎯 Calibrated %s scale %.5g for privacy distance %.5g", mechanism, scale, target_distance)
    return float(scale)
