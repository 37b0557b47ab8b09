#!/usr/bin/env python3
"""
Tests for the Laplace and Gaussian noise-addition baselines
"""

import math

import numpy as np
import pytest

from rvns_baselines import (
    NoiseConfig,
    calibrate_scale,
    expected_baseline_privacy,
    perturb_noise,
    perturb_noise_batch,
)
from rvns_core import DataRange, Dataset
from rvns_errors import InvalidArgumentError

RANGE = DataRange(a=0, b=10)


def uniform_dataset(n=2000, seed=0):
    return Dataset(range=RANGE, values=np.random.default_rng(seed).uniform(0, 10, size=n))


def test_scale_must_be_positive():
    with pytest.raises(InvalidArgumentError):
        NoiseConfig(scale=0.0)


def test_single_value_perturbation():
    rng = np.random.default_rng(1)
    assert perturb_noise(5.0, NoiseConfig(scale=1e-9), RANGE, rng) == pytest.approx(5.0, abs=1e-6)
    with pytest.raises(InvalidArgumentError):
        perturb_noise(11.0, NoiseConfig(), RANGE, rng)


def test_clipping_keeps_values_in_range():
    config = NoiseConfig(mechanism="gaussian", scale=5.0, clip_to_range=True)
    noisy = perturb_noise_batch(np.full(1000, 9.5), config, RANGE, np.random.default_rng(2))
    assert np.all(RANGE.contains(noisy))


@pytest.mark.parametrize("mechanism, variance_factor", [("laplace", 2.0), ("gaussian", 1.0)])
def test_noise_variance(mechanism, variance_factor):
    config = NoiseConfig(mechanism=mechanism, scale=0.5)
    values = np.full(200_000, 5.0)
    noisy = perturb_noise_batch(values, config, RANGE, np.random.default_rng(3))
    assert np.var(noisy - values) == pytest.approx(variance_factor * 0.25, rel=0.02)


def test_expected_privacy_matches_noise_energy():
    data = uniform_dataset()
    distance = expected_baseline_privacy(data, NoiseConfig(mechanism="gaussian", scale=1.0), seed=4)
    assert distance == pytest.approx(math.sqrt(len(data)), rel=0.03)


@pytest.mark.parametrize("mechanism", ["laplace", "gaussian"])
def test_calibration_hits_target(mechanism):
    data = uniform_dataset()
    scale = calibrate_scale(data, mechanism, target_distance=50.0, seed=5)
    config = NoiseConfig(mechanism=mechanism, scale=scale)
    assert expected_baseline_privacy(data, config, seed=5) == pytest.approx(50.0, rel=1e-3)


def test_calibration_rejects_bad_target():
    with pytest.raises(InvalidArgumentError):
        calibrate_scale(uniform_dataset(), "laplace", target_distance=0.0)


@pytest.mark.parametrize("mechanism", ["laplace", "gaussian"])
def test_expected_privacy_grows_with_scale(mechanism):
    data = uniform_dataset(n=1000, seed=5)
    distances = [
        expected_baseline_privacy(data, NoiseConfig(mechanism=mechanism, scale=scale), seed=3, repetitions=3)
        for scale in (0.5, 1.0, 2.0, 4.0)
    ]
    assert all(low < high for low, high in zip(distances, distances[1:]))
