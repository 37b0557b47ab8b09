"""
RVNS metrics
Utility evaluation: Wasserstein-1 between discrete distributions, resampling
from an estimated density and the six statistical indicators.
"""

from __future__ import annotations

import logging
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import stats

from rvns_core import (
    NORMALIZATION_TOLERANCE,
    DataRange,
    Dataset,
    DensityVector,
    InterestGrid,
    make_uniform_grid,
)
from rvns_errors import InvalidArgumentError

logger = logging.getLogger(__name__)

MODE_CELLS = 100

Distribution = Union[DensityVector, np.ndarray, list]


class IndicatorSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float
    std_dev: float
    mode: float
    median: float
    skewness: float
    kurtosis: float

    def abs_diff(self, other: "IndicatorSet") -> "IndicatorSet":
        return IndicatorSet(
            **{name: abs(getattr(self, name) - getattr(other, name)) for name in IndicatorSet.model_fields}
        )


def _mass_vector(dist: Distribution, as_masses: bool) -> np.ndarray:
    if isinstance(dist, DensityVector):
        if as_masses:
            raw = np.asarray(dist.values, dtype=float)
        else:
            return dist.masses()
    else:
        raw = np.asarray(dist, dtype=float)
        if not as_masses:
            raise InvalidArgumentError("plain arrays are mass vectors; pass as_masses=True")
    if np.any(raw < 0):
        raise InvalidArgumentError("masses must be nonnegative")
    total = raw.sum()
    if total <= 0:
        raise InvalidArgumentError("mass vector has zero total")
    return raw / total


def wasserstein1(
    r: Distribution,
    s: Distribution,
    as_masses: bool = False,
    scaled: bool = False,
    grid: Optional[InterestGrid] = None,
) -> float:
    """
    Sum over grid indices of |F_R(i) - F_S(i)|.

    Args:
        r, s: DensityVectors on one grid, or mass vectors of equal length
        as_masses: treat the values as masses instead of densities
        scaled: weight each term by the cell width, giving the W1 metric on the z line
        grid: grid for scaled plain mass vectors

    Returns:
        nonnegative distance
    """
    if isinstance(r, DensityVector) and isinstance(s, DensityVector):
        if not r.grid.same_as(s.grid):
            raise InvalidArgumentError("grid mismatch in wasserstein1")
        grid = grid or r.grid
    p, q = _mass_vector(r, as_masses), _mass_vector(s, as_masses)
    if p.shape != q.shape:
        raise InvalidArgumentError(f"distributions differ in length: {len(p)} vs {len(q)}")

    gaps = np.abs(np.cumsum(p) - np.cumsum(q))
    if scaled:
        if grid is None:
            raise InvalidArgumentError("the scaled distance needs a grid")
        if grid.m != len(p):
            raise InvalidArgumentError("grid mismatch in wasserstein1")
        gaps = gaps * grid.widths
    return float(gaps.sum())


def resample(density: DensityVector, count: int, rng: np.random.Generator) -> Dataset:
    """
    Draw count values by inverse CDF of the piecewise-linear interpolation of
    density between consecutive grid points.
    """
    if count < 1:
        raise InvalidArgumentError(f"count must be positive, got {count}")
    if abs(density.area() - 1.0) > NORMALIZATION_TOLERANCE:
        raise InvalidArgumentError(f"density is not normalized (area {density.area():.9f})")
    z = density.grid.points
    v = np.asarray(density.values)
    if len(z) < 2:
        raise InvalidArgumentError("resampling needs at least two grid points")

    width = np.diff(z)
    left, right = v[:-1], v[1:]
    segment_mass = 0.5 * (left + right) * width
    total = segment_mass.sum()
    if total <= 0:
        raise InvalidArgumentError("interpolated density has no mass between grid points")

    cumulative = np.cumsum(segment_mass)
    u = rng.random(count) * total
    segment = np.minimum(np.searchsorted(cumulative, u, side="right"), len(width) - 1)
    within = u - (cumulative[segment] - segment_mass[segment])

    # solve left*t + slope*t^2/2 = within on each segment
    slope = (right[segment] - left[segment]) / width[segment]
    start = left[segment]
    root = np.sqrt(np.maximum(start * start + 2.0 * slope * within, 0.0))
    denominator = start + root
    t = np.where(denominator > 0, 2.0 * within / np.where(denominator > 0, denominator, 1.0), 0.0)
    t = np.clip(t, 0.0, width[segment])

    values = z[segment] + t
    logger.debug("resampled %d values over %d segments", count, len(width))
    return Dataset(range=_grid_range(density.grid), values=values)


def _grid_range(grid: InterestGrid) -> DataRange:
    return DataRange(a=float(grid.points[0]), b=float(grid.points[-1]))


def _histogram_mode(values: np.ndarray, grid: Optional[InterestGrid]) -> float:
    low, high = float(values.min()), float(values.max())
    if grid is None:
        if low == high:
            return low
        grid = make_uniform_grid(DataRange(a=low, b=high), MODE_CELLS)
    if grid.m == 1:
        return float(grid.points[0])
    # cells between grid points only; the last cell is closed at the range end
    edges = grid.points
    counts, _ = np.histogram(values, bins=edges)
    midpoints = (edges[:-1] + edges[1:]) / 2.0
    return float(midpoints[int(np.argmax(counts))])


def indicators(data, grid: Optional[InterestGrid] = None) -> IndicatorSet:
    """
    Mean, sample std (n - 1), histogram mode on grid cells, median, adjusted
    Fisher-Pearson skewness and Pearson (non-excess) kurtosis.
    """
    values = np.asarray(data.values if isinstance(data, Dataset) else data, dtype=float)
    if len(values) == 0:
        raise InvalidArgumentError("indicators need at least one value")
    n = len(values)
    std = float(np.std(values, ddof=1)) if n > 1 else 0.0
    if np.ptp(values) == 0:
        skewness = kurtosis = 0.0
        std = 0.0
    else:
        skewness = float(stats.skew(values, bias=n < 3))
        kurtosis = float(stats.kurtosis(values, fisher=False, bias=True))
    return IndicatorSet(
        mean=float(np.mean(values)),
        std_dev=std,
        mode=_histogram_mode(values, grid),
        median=float(np.median(values)),
        skewness=skewness,
        kurtosis=kurtosis,
    )


def density_indicators(density: DensityVector) -> IndicatorSet:
    """Indicators of the distribution a density vector describes, mode = argmax grid point."""
    z = density.grid.points
    p = density.masses()
    mean = float(np.dot(p, z))
    centered = z - mean
    variance = float(np.dot(p, centered ** 2))
    cdf = np.cumsum(p)
    median = float(z[min(int(np.searchsorted(cdf, 0.5)), len(z) - 1)])
    if variance <= 0:
        skewness = kurtosis = 0.0
    else:
        skewness = float(np.dot(p, centered ** 3) / variance ** 1.5)
        kurtosis = float(np.dot(p, centered ** 4) / variance ** 2)
    return IndicatorSet(
        mean=mean,
        std_dev=variance ** 0.5,
        mode=float(z[int(np.argmax(density.values))]),
        median=median,
        skewness=skewness,
        kurtosis=kurtosis,
    )


def indicator_error(
    original: Dataset,
    estimated_density: DensityVector,
    count: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> IndicatorSet:
    """
    |indicator(original) - indicator(resampled)| for each of the six indicators.

    Both modes use the density's grid cells.
    """
    rng = rng if rng is not None else np.random.default_rng()
    count = count or len(original)
    sample = resample(estimated_density, count, rng)
    grid = estimated_density.grid
    return indicators(original, grid).abs_diff(indicators(sample, grid))
