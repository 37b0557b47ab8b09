#!/usr/bin/env python3
"""
Tests for client-side perturbation, the analytic kernel and the privacy budget
"""

import math

import numpy as np
import pytest

from rvns_core import DataRange, PerturbationConfig
from rvns_errors import InvalidArgumentError
from rvns_perturbation import (
    band_limits,
    empirical_ldp_ratio,
    kernel_density,
    kernel_density_array,
    ldp_budget,
    perturb,
    perturb_batch,
    prohibited_band,
)

RANGE = DataRange(a=0, b=10)


def config(d=1.0, k=1, data_range=RANGE):
    return PerturbationConfig(range=data_range, d=d, k=k)


def integrate_over_y(x, cfg, cells=200_000):
    width = cfg.range.width / cells
    midpoints = cfg.range.a + width * (np.arange(cells) + 0.5)
    return float(kernel_density_array(x, midpoints, cfg).sum() * width)


def test_kernel_examples():
    cfg = config()
    assert kernel_density(5, 5, cfg) == 0.0
    assert kernel_density(5, 3, cfg) == pytest.approx(1 / 9)
    assert kernel_density(5, 4.5, cfg) == pytest.approx(1 / 18)
    assert kernel_density(5, 5.5, cfg) == pytest.approx(1 / 18)


def test_kernel_rejects_out_of_range():
    with pytest.raises(InvalidArgumentError):
        kernel_density(11, 3, config())
    with pytest.raises(InvalidArgumentError):
        kernel_density(5, -0.1, config())


@pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 2.5, 5.0, 8.9, 9.5, 10.0])
def test_kernel_integrates_to_one(x):
    assert integrate_over_y(x, config()) == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("x", [0.5, 3.0, 5.0, 7.0, 9.5])
def test_wide_band_kernel_integrates_to_one(x):
    assert integrate_over_y(x, config(d=6.0)) == pytest.approx(1.0, abs=1e-4)


def test_band_limits_cases():
    cfg = config(d=2.0)
    low, high = band_limits(np.array([5.0, 0.5, 9.5]), cfg)
    assert np.allclose(low, [0.0, 0.0, 1.5])
    assert np.allclose(high, [2.0, 0.5, 2.0])
    assert prohibited_band(5.0, 0.5, cfg) == (4.5, 6.5)


def test_left_edge_value_forces_band_start():
    report = perturb(0.0, config(k=3), np.random.default_rng(1))
    assert report.band_offset == 0.0
    assert report.k == 3
    assert np.all(report.samples >= 1.0) and np.all(report.samples <= 10.0)


def test_right_edge_value_forces_band_end():
    report = perturb(10.0, config(k=3), np.random.default_rng(2))
    assert report.band_offset == pytest.approx(1.0)
    assert np.all(report.samples >= 0.0) and np.all(report.samples < 9.0)


def test_perturb_rejects_out_of_range():
    with pytest.raises(InvalidArgumentError):
        perturb(10.5, config(), np.random.default_rng(0))


def test_samples_avoid_their_band():
    cfg = config(d=2.0, k=4)
    rng = np.random.default_rng(3)
    values = rng.uniform(0, 10, size=5000)
    batch = perturb_batch(values, cfg, rng)
    start = (values - batch.band_offsets)[:, None]
    inside = (batch.samples > start) & (batch.samples < start + cfg.d)
    assert not inside.any()
    assert np.all(RANGE.contains(batch.samples))
    assert np.all(start >= -1e-12) and np.all(start + cfg.d <= 10 + 1e-12)


def test_perturb_batch_is_seeded():
    cfg = config(d=2.0, k=5)
    values = np.linspace(0, 10, 50)
    first = perturb_batch(values, cfg, np.random.default_rng(42))
    second = perturb_batch(values, cfg, np.random.default_rng(42))
    assert np.array_equal(first.samples, second.samples)
    assert first.samples.shape == (50, 5)
    assert first.user_ids[0] == "0"


def test_histogram_matches_kernel():
    cfg = config()
    rng = np.random.default_rng(5)
    batch = perturb_batch(np.full(1_000_000, 5.0), cfg, rng)
    edges = np.linspace(0, 10, 201)
    counts, _ = np.histogram(batch.pooled(), bins=edges)
    observed = counts / counts.sum()

    fine = np.linspace(0, 10, 200 * 50 + 1)
    centers = (fine[:-1] + fine[1:]) / 2
    expected = (kernel_density_array(5.0, centers, cfg) * (fine[1] - fine[0])).reshape(200, 50).sum(axis=1)
    assert np.max(np.abs(observed - expected)) <= 3e-3


def test_budget_values():
    assert ldp_budget(config(), 0.01).epsilon == pytest.approx(math.log(400))
    assert ldp_budget(config(), 0.01).epsilon == pytest.approx(5.9915, abs=1e-4)
    assert ldp_budget(config(k=5), 0.01).epsilon == pytest.approx(29.957, abs=1e-3)


def test_budget_rejects_wide_neighborhood():
    with pytest.raises(InvalidArgumentError):
        ldp_budget(config(), 4.0)
    with pytest.raises(InvalidArgumentError):
        ldp_budget(config(), 0.0)


def test_empirical_ratio_within_budget_for_interior_values():
    cfg = config()
    delta = 0.5
    ratio = empirical_ldp_ratio(
        cfg,
        delta,
        x_points=[2.0, 3.5, 5.0, 6.5, 8.0],
        y_points=np.linspace(1, 9, 17),
        samples_per_x=100_000,
        rng=np.random.default_rng(11),
    )
    assert 1.0 <= ratio <= math.exp(ldp_budget(cfg, delta).epsilon)


@pytest.mark.slow
def test_kernel_normalization_over_random_configurations():
    rng = np.random.default_rng(21)
    cells = 100_000
    worst = 0.0
    for _ in range(1000):
        a = rng.uniform(-10, 10)
        width = rng.uniform(0.5, 20)
        cfg = config(d=rng.uniform(0.01, 0.8) * width, data_range=DataRange(a=a, b=a + width))
        x = rng.uniform(a, a + width)
        worst = max(worst, abs(integrate_over_y(x, cfg, cells) - 1.0))
    assert worst <= 1e-4
