"""
RVNS perturbation
Client-side negative-survey perturbation, the analytic perturbation kernel
p(x, y) and the local differential privacy budget.
"""

from __future__ import annotations

import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from rvns_core import PerturbationConfig, PerturbedReport, ReportBatch
from rvns_errors import InvalidArgumentError

logger = logging.getLogger(__name__)


class LdpBudget(BaseModel):
    model_config = ConfigDict(frozen=True)

    epsilon: float
    delta_neighborhood: float
    k: int
    d: float

    @model_validator(mode="after")
    def _check_neighborhood(self) -> "LdpBudget":
        if not 0 < self.delta_neighborhood < 4 * self.d:
            raise InvalidArgumentError(
                f"neighborhood half-width must satisfy 0 < delta < 4d = {4 * self.d}"
            )
        return self


def _check_in_range(values, config: PerturbationConfig, what: str) -> None:
    if not np.all(config.range.contains(values)):
        raise InvalidArgumentError(
            f"{what} must lie in [{config.range.a}, {config.range.b}]"
        )


def band_limits(x, config: PerturbationConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Admissible interval [low, high] of the band offset d1 for true value(s) x.

    The band [x - d1, x + d - d1] must stay inside [a, b]:
      - interior (x - a >= d and b - x >= d): d1 in [0, d]
      - left edge (x - a < d): d1 in [0, x - a]
      - right edge (b - x < d): d2 = d - d1 in [0, b - x]
      - both edges (only when d > (b - a) / 2): band start in [a, b - d]
    """
    a, b, d = config.range.a, config.range.b, config.d
    x = np.asarray(x, dtype=float)
    left = x - a < d
    right = b - x < d
    low = np.where(right, x + d - b, 0.0)
    high = np.where(left, x - a, d)
    return low, high


def prohibited_band(x: float, band_offset: float, config: PerturbationConfig) -> Tuple[float, float]:
    return x - band_offset, x + config.d - band_offset


def _sample_outside_band(band_start: np.ndarray, config: PerturbationConfig, u: np.ndarray) -> np.ndarray:
    # u is uniform on [0, 1); the two allowed pieces are picked by length
    a, b, d = config.range.a, config.range.b, config.d
    offset = u * (b - a - d)
    left_length = band_start - a
    return np.where(offset < left_length, a + offset, band_start + d + (offset - left_length))


def perturb(
    x: float,
    config: PerturbationConfig,
    rng: np.random.Generator,
    user_id: str = "0",
) -> PerturbedReport:
    """
    Perturb one private value into k samples drawn outside a random prohibited band.

    Args:
        x: the private value, within [a, b]
        config: range, band width d and samples-per-user k
        rng: numpy random generator
        user_id: opaque identifier carried into the report

    Returns:
        PerturbedReport with k samples; band_offset records the drawn d1.
    """
    _check_in_range(x, config, "x")
    low, high = band_limits(x, config)
    d1 = float(low + (high - low) * rng.random())
    samples = _sample_outside_band(np.full(config.k, x - d1), config, rng.random(config.k))
    return PerturbedReport(user_id=user_id, samples=samples, band_offset=d1)


def perturb_batch(
    values,
    config: PerturbationConfig,
    rng: np.random.Generator,
    user_ids: Optional[Sequence[str]] = None,
) -> ReportBatch:
    """Vectorized perturb() over many users; one d1 per user shared by its k samples."""
    values = np.asarray(values, dtype=float)
    _check_in_range(values, config, "values")
    n = len(values)
    if user_ids is None:
        user_ids = [str(i) for i in range(n)]
    elif len(user_ids) != n:
        raise InvalidArgumentError("user_ids and values differ in length")

    low, high = band_limits(values, config)
    d1 = low + (high - low) * rng.random(n)
    band_start = (values - d1)[:, None]
    samples = _sample_outside_band(band_start, config, rng.random((n, config.k)))
    logger.debug("🔀 Perturbed %d users with d=%g, k=%d", n, config.d, config.k)
    return ReportBatch(user_ids=list(user_ids), samples=samples, band_offsets=d1)


def _kernel_by_overlap(x: np.ndarray, y: np.ndarray, config: PerturbationConfig) -> np.ndarray:
    # band start uniform on [a, b - d]: p = c * (1 - P(y inside band))
    a, b, d = config.range.a, config.range.b, config.d
    c = config.outside_density
    covered = np.clip(np.minimum(y, b - d) - np.maximum(y - d, a), 0.0, None)
    return c * (1.0 - covered / (b - a - d))


def kernel_density_array(x, y, config: PerturbationConfig) -> np.ndarray:
    """
    Evaluate p(x, y) elementwise with numpy broadcasting; no range checks.

    Cases follow the position of the band: left edge (a <= x < a + d),
    interior (a + d <= x <= b - d) and right edge (b - d < x <= b). When the
    band is wider than half the range, values with both edges in reach use the
    overlap form of the same rule.
    """
    a, b, d = config.range.a, config.range.b, config.d
    c = config.outside_density
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    # avoid 0/0 at x = a or x = b; those ramps have empty support anyway
    to_left = x - a
    to_right = b - x
    left_den = np.where(to_left > 0, to_left, 1.0)
    right_den = np.where(to_right > 0, to_right, 1.0)

    left_edge = np.select(
        [(y >= x) & (y <= a + d), y > x + d, y < x, (y > a + d) & (y <= x + d)],
        [0.0, c, c * (x - y) / left_den, c * (y - a - d) / left_den],
        default=0.0,
    )
    interior = np.select(
        [y == x, (y < x - d) | (y > x + d), y < x, y > x],
        [0.0, c, c * (x - y) / d, c * (y - x) / d],
        default=0.0,
    )
    right_edge = np.select(
        [(y >= b - d) & (y <= x), y < x - d, y < b - d, y > x],
        [0.0, c, c * (b - d - y) / right_den, c * (y - x) / right_den],
        default=0.0,
    )

    both_edges = (to_left < d) & (to_right < d)
    result = np.select(
        [both_edges, x < a + d, x <= b - d],
        [_kernel_by_overlap(x, y, config), left_edge, interior],
        default=right_edge,
    )
    return result


def kernel_density(x: float, y: float, config: PerturbationConfig) -> float:
    """Probability density that a user holding x reports y."""
    _check_in_range(x, config, "x")
    _check_in_range(y, config, "y")
    return float(kernel_density_array(x, y, config))


def ldp_budget(config: PerturbationConfig, delta: float) -> LdpBudget:
    """
    Privacy budget epsilon = k * ln(4d / delta) for output neighborhoods of half-width delta.
    """
    if not 0 < delta < 4 * config.d:
        raise InvalidArgumentError(
            f"delta must satisfy 0 < delta < 4d = {4 * config.d}, got {delta}"
        )
    epsilon = config.k * math.log(4 * config.d / delta)
    return LdpBudget(epsilon=epsilon, delta_neighborhood=delta, k=config.k, d=config.d)


def empirical_ldp_ratio(
    config: PerturbationConfig,
    delta: float,
    x_points,
    y_points,
    samples_per_x: int,
    rng: np.random.Generator,
) -> float:
    """
    Largest observed ratio Pr[y' in [y - delta, y + delta] | x1] / Pr[... | x2]
    over all checked pairs, for single-sample reports.

    Returns inf when some checked neighborhood is reachable from one x but not
    another.
    """
    single = config.model_copy(update={"k": 1})
    x_points = np.asarray(x_points, dtype=float)
    y_points = np.asarray(y_points, dtype=float)
    _check_in_range(x_points, config, "x_points")

    probabilities = np.empty((len(x_points), len(y_points)))
    for i, x in enumerate(x_points):
        batch = perturb_batch(np.full(samples_per_x, x), single, rng)
        draws = np.sort(batch.pooled())
        hits = np.searchsorted(draws, y_points + delta, side="right") - np.searchsorted(
            draws, y_points - delta, side="left"
        )
        probabilities[i] = hits / samples_per_x

    highest = probabilities.max(axis=0)
    lowest = probabilities.min(axis=0)
    reachable = highest > 0
    if np.any(reachable & (lowest == 0)):
        return float("inf")
    if not np.any(reachable):
        return 1.0
    return float(np.max(highest[reachable] / lowest[reachable]))
