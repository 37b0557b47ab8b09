#!/usr/bin/env python3
"""
Tests for the maximum-likelihood inference attack and the privacy distance
"""

import math

import numpy as np
import pytest

from rvns_attack import attack, infer_batch, infer_user, privacy_distance
from rvns_core import DataRange, Dataset, PerturbationConfig, PerturbedReport
from rvns_errors import InvalidArgumentError
from rvns_perturbation import kernel_density_array, perturb_batch

RANGE = DataRange(a=0, b=10)


def test_flat_likelihood_picks_smallest_value():
    config = PerturbationConfig(range=RANGE, d=1.0, k=1)
    x, score = infer_user(PerturbedReport(user_id="u", samples=[3.0]), config)
    assert x == 0.0
    assert score == pytest.approx(math.log(1 / 9))


def test_centroid_tie_rule():
    config = PerturbationConfig(range=RANGE, d=1.0, k=1)
    x, _ = infer_batch([[3.0]], config, tie_rule="centroid")
    assert x[0] == pytest.approx(5.5, abs=0.05)


def test_inferred_value_is_at_least_as_likely_as_truth():
    config = PerturbationConfig(range=RANGE, d=2.0, k=5)
    rng = np.random.default_rng(0)
    truth = rng.uniform(0, 10, size=300)
    batch = perturb_batch(truth, config, rng)
    inferred, scores = infer_batch(batch.samples, config, extra_candidates=truth[:, None])

    with np.errstate(divide="ignore"):
        truth_scores = np.log(kernel_density_array(truth[:, None], batch.samples, config)).sum(axis=1)
    assert np.all(scores >= truth_scores - 1e-12)
    assert np.all(RANGE.contains(inferred))
    assert np.all(np.isfinite(scores))


def test_attack_keeps_user_order():
    config = PerturbationConfig(range=RANGE, d=2.0, k=3)
    rng = np.random.default_rng(1)
    batch = perturb_batch(rng.uniform(0, 10, size=20), config, rng, user_ids=[f"user{i}" for i in range(20)])
    result = attack(batch, config, grid_resolution=200)
    assert result.user_ids == batch.user_ids
    assert len(result.inferred) == 20
    assert result.log_likelihoods.shape == (20,)


def test_attack_rejects_empty_input():
    config = PerturbationConfig(range=RANGE, d=2.0)
    with pytest.raises(InvalidArgumentError):
        attack([], config)


def test_privacy_distance_examples():
    assert privacy_distance([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert privacy_distance([0.0, 0.0], [3.0, 4.0]) == pytest.approx(5.0)
    data = Dataset(range=RANGE, values=[0.0, 0.0])
    assert privacy_distance(data, Dataset(range=RANGE, values=[3.0, 4.0])) == pytest.approx(5.0)


def test_privacy_distance_length_mismatch():
    with pytest.raises(InvalidArgumentError):
        privacy_distance([1.0, 2.0], [1.0])



def test_narrow_band_leaves_attacker_at_range_start():
    # with a band this narrow almost every candidate is equally likely
    config = PerturbationConfig(range=RANGE, d=0.05, k=5)
    rng = np.random.default_rng(12)
    truth = np.clip(rng.chisquare(2, size=2000), 0, 10)
    batch = perturb_batch(truth, config, rng)
    inferred, _ = infer_batch(batch.samples, config)

    assert np.median(inferred) <= 0.05
    assert privacy_distance(truth, inferred) == pytest.approx(np.linalg.norm(truth - RANGE.a), rel=0.05)
    assert privacy_distance(truth, inferred) > 0
