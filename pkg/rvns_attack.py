"""
RVNS attack
Maximum-likelihood inference of private values from perturbed reports, and
the Euclidean privacy distance between true and guessed values.
"""

from __future__ import annotations

import logging
import math
from typing import List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from rvns_core import Dataset, PerturbationConfig, PerturbedReport, as_batch
from rvns_errors import InvalidArgumentError
from rvns_perturbation import kernel_density_array

logger = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
GOLDEN_STEPS = 48
USERS_PER_BLOCK = 128

TieRule = Literal["smallest", "centroid"]


class AttackResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    user_ids: List[str]
    inferred: Dataset
    log_likelihoods: np.ndarray

    @field_validator("log_likelihoods", mode="before")
    @classmethod
    def _as_array(cls, v):
        arr = np.array(v, dtype=float)
        arr.setflags(write=False)
        return arr


def _log_likelihood(x: np.ndarray, samples: np.ndarray, config: PerturbationConfig) -> np.ndarray:
    # x: (users, candidates), samples: (users, k) -> (users, candidates)
    p = kernel_density_array(x[:, :, None], samples[:, None, :], config)
    with np.errstate(divide="ignore"):
        return np.log(p).sum(axis=2)


def _golden_refine(low: np.ndarray, high: np.ndarray, samples: np.ndarray, config: PerturbationConfig):
    """Vectorized golden-section maximization, one interval per user."""

    def score(x):
        return _log_likelihood(x[:, None], samples, config)[:, 0]

    c = high - GOLDEN * (high - low)
    d = low + GOLDEN * (high - low)
    fc, fd = score(c), score(d)
    for _ in range(GOLDEN_STEPS):
        # ties keep the left part so flat regions drift toward smaller x
        keep_left = fc >= fd
        high = np.where(keep_left, d, high)
        low = np.where(keep_left, low, c)
        c = high - GOLDEN * (high - low)
        d = low + GOLDEN * (high - low)
        fc, fd = score(c), score(d)
    x = (low + high) / 2.0
    return x, score(x)


def infer_batch(
    samples,
    config: PerturbationConfig,
    grid_resolution: int = 1000,
    tie_rule: TieRule = "smallest",
    extra_candidates=None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Infer the most likely private value of every user.

    Args:
        samples: n x k matrix of perturbed samples
        config: the perturbation settings known to the adversary
        grid_resolution: number of uniform candidates on [a, b]
        tie_rule: "smallest" picks the smallest maximizer, "centroid" the mean of the argmax set
        extra_candidates: optional values (shape (e,) or (n, e)) scored alongside the grid

    Returns:
        (inferred values, maximized log-likelihoods), one entry per user.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if grid_resolution < 2:
        raise InvalidArgumentError("grid_resolution must be at least 2")
    a, b = config.range.a, config.range.b
    n = samples.shape[0]
    candidates = np.linspace(a, b, grid_resolution)
    spacing = candidates[1] - candidates[0]

    extras = None
    if extra_candidates is not None:
        extras = np.asarray(extra_candidates, dtype=float)
        extras = np.broadcast_to(extras if extras.ndim == 2 else extras[None, :], (n, extras.shape[-1]))
        if not np.all(config.range.contains(extras)):
            raise InvalidArgumentError("extra candidates must lie in the data range")

    inferred = np.empty(n)
    scores = np.empty(n)
    for start in range(0, n, USERS_PER_BLOCK):
        block = samples[start:start + USERS_PER_BLOCK]
        rows = len(block)
        grid_scores = _log_likelihood(np.broadcast_to(candidates, (rows, grid_resolution)), block, config)
        best = np.argmax(grid_scores, axis=1)
        best_score = grid_scores[np.arange(rows), best]

        if tie_rule == "centroid":
            winners = (grid_scores == best_score[:, None]) & np.isfinite(best_score)[:, None]
            counts = np.maximum(winners.sum(axis=1), 1)
            x = np.where(winners.any(axis=1), (winners * candidates).sum(axis=1) / counts, candidates[best])
            inferred[start:start + rows] = x
            scores[start:start + rows] = best_score
            continue

        x = candidates[best]
        low = np.maximum(x - spacing, a)
        high = np.minimum(x + spacing, b)
        refined, refined_score = _golden_refine(low, high, block, config)
        better = refined_score > best_score
        x = np.where(better, refined, x)
        score = np.where(better, refined_score, best_score)

        if extras is not None:
            extra_block = extras[start:start + rows]
            extra_scores = _log_likelihood(extra_block, block, config)
            pool_x = np.column_stack([x, extra_block])
            pool_score = np.column_stack([score, extra_scores])
            top = pool_score.max(axis=1)
            x = np.where(pool_score == top[:, None], pool_x, np.inf).min(axis=1)
            score = top

        inferred[start:start + rows] = x
        scores[start:start + rows] = score

    return inferred, scores


def infer_user(
    report: PerturbedReport,
    config: PerturbationConfig,
    grid_resolution: int = 1000,
    tie_rule: TieRule = "smallest",
    extra_candidates=None,
) -> Tuple[float, float]:
    """Most likely private value of one report and its log-likelihood."""
    x, score = infer_batch(
        report.samples[None, :], config, grid_resolution, tie_rule, extra_candidates
    )
    return float(x[0]), float(score[0])


def attack(
    reports,
    config: PerturbationConfig,
    grid_resolution: int = 1000,
    tie_rule: TieRule = "smallest",
) -> AttackResult:
    batch = as_batch(reports)
    logger.info("🕵️ Inferring private values of %d users", len(batch))
    x, scores = infer_batch(batch.samples, config, grid_resolution, tie_rule)
    return AttackResult(
        user_ids=list(batch.user_ids),
        inferred=Dataset(range=config.range, values=x),
        log_likelihoods=scores,
    )


def _values(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return np.asarray(data.values)
    return np.asarray(data, dtype=float)


def privacy_distance(original, guess) -> float:
    """Euclidean distance sqrt(sum (x_i - x'_i)^2) between index-aligned datasets."""
    x = _values(original)
    x_guess = _values(guess)
    if x.shape != x_guess.shape:
        raise InvalidArgumentError(
            f"datasets must have equal length, got {len(x)} and {len(x_guess)}"
        )
    return float(np.linalg.norm(x - x_guess))
