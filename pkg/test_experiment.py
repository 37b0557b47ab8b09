#!/usr/bin/env python3
"""
Tests for the privacy-utility sweep against the noise baselines
"""

import pytest

from rvns_experiment import ExperimentConfig, run_experiment


def sweep(**overrides):
    settings = {
        "df": 2,
        "n": 20_000,
        "m": 100,
        "k": 5,
        "d_sweep": [2.0],
        "baselines": ["laplace"],
        "repetitions": 3,
        "grid_resolution": 200,
        "record_runtime": False,
    }
    settings.update(overrides)
    return run_experiment(ExperimentConfig(**settings)).set_index("mechanism")


@pytest.mark.slow
def test_rvns_beats_raw_and_laplace_at_matched_privacy():
    table = sweep(match_baselines=True, include_raw=True)
    rvns, raw, laplace = table.loc["rvns"], table.loc["rvns_raw"], table.loc["laplace"]

    assert laplace["privacy_distance"] == pytest.approx(rvns["privacy_distance"], rel=0.05)
    assert rvns["wasserstein"] < raw["wasserstein"]
    assert rvns["wasserstein"] < laplace["wasserstein"]


@pytest.mark.slow
def test_rvns_keeps_more_privacy_at_matched_utility():
    table = sweep(baseline_scales=[0.05, 0.1, 0.2, 0.4, 0.8, 1.6])
    rvns = table.loc["rvns"]
    laplace = table.loc[["laplace"]]

    as_useful = laplace[laplace["wasserstein"] <= rvns["wasserstein"]]
    assert len(as_useful) > 0
    assert (as_useful["privacy_distance"] < rvns["privacy_distance"]).all()
