"""
RVNS domain types
Value ranges, interest grids, density vectors and perturbed reports shared by
every other module. All models are frozen; array fields are read-only numpy
arrays.
"""

from __future__ import annotations

from typing import Iterator, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from rvns_errors import InvalidArgumentError

NORMALIZATION_TOLERANCE = 1e-6


def _readonly(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise InvalidArgumentError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class _ArrayModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class DataRange(BaseModel):
    """The value domain [a, b] of the private data."""

    model_config = ConfigDict(frozen=True)

    a: float
    b: float

    @model_validator(mode="after")
    def _check_order(self) -> "DataRange":
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise InvalidArgumentError("range bounds must be finite")
        if not self.a < self.b:
            raise InvalidArgumentError(f"range requires a < b, got [{self.a}, {self.b}]")
        return self

    @property
    def width(self) -> float:
        return self.b - self.a

    def contains(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return (values >= self.a) & (values <= self.b)


class PerturbationConfig(BaseModel):
    """Band width d and samples-per-user k for one survey."""

    model_config = ConfigDict(frozen=True)

    range: DataRange
    d: float
    k: int = 1

    @model_validator(mode="after")
    def _check_band(self) -> "PerturbationConfig":
        if not 0 < self.d < self.range.width:
            raise InvalidArgumentError(
                f"band width must satisfy 0 < d < b - a = {self.range.width}, got {self.d}"
            )
        if self.k < 1:
            raise InvalidArgumentError(f"k must be at least 1, got {self.k}")
        return self

    @property
    def outside_density(self) -> float:
        """Conditional density 1/(b - a - d) of a sample given its band."""
        return 1.0 / (self.range.width - self.d)


class Dataset(_ArrayModel):
    range: DataRange
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _as_array(cls, v):
        return _readonly(v, 1, "values")

    @model_validator(mode="after")
    def _check_values(self) -> "Dataset":
        if not np.all(self.range.contains(self.values)):
            raise InvalidArgumentError(
                f"dataset values must lie in [{self.range.a}, {self.range.b}]"
            )
        return self

    def __len__(self) -> int:
        return len(self.values)


class PerturbedReport(_ArrayModel):
    """One user's k perturbed samples. band_offset is d1, kept for diagnostics."""

    user_id: str
    samples: np.ndarray
    band_offset: float = float("nan")

    @field_validator("samples", mode="before")
    @classmethod
    def _as_array(cls, v):
        return _readonly(v, 1, "samples")

    @property
    def k(self) -> int:
        return len(self.samples)

    def validate_against(self, config: PerturbationConfig) -> None:
        if self.k != config.k:
            raise InvalidArgumentError(
                f"report {self.user_id} has {self.k} samples, expected k={config.k}"
            )
        if not np.all(config.range.contains(self.samples)):
            raise InvalidArgumentError(f"report {self.user_id} has samples outside the range")


class ReportBatch(_ArrayModel):
    """Reports of many users stored column-wise: samples is n x k."""

    user_ids: List[str]
    samples: np.ndarray
    band_offsets: np.ndarray

    @field_validator("samples", mode="before")
    @classmethod
    def _samples_matrix(cls, v):
        return _readonly(v, 2, "samples")

    @field_validator("band_offsets", mode="before")
    @classmethod
    def _offsets(cls, v):
        return _readonly(v, 1, "band_offsets")

    @model_validator(mode="after")
    def _check_shapes(self) -> "ReportBatch":
        n = len(self.user_ids)
        if self.samples.shape[0] != n or self.band_offsets.shape[0] != n:
            raise InvalidArgumentError("user_ids, samples and band_offsets disagree in length")
        return self

    def __len__(self) -> int:
        return len(self.user_ids)

    @property
    def k(self) -> int:
        return self.samples.shape[1]

    def pooled(self) -> np.ndarray:
        return self.samples.reshape(-1)

    def reports(self) -> Iterator[PerturbedReport]:
        for i, user_id in enumerate(self.user_ids):
            yield PerturbedReport(
                user_id=user_id, samples=self.samples[i], band_offset=float(self.band_offsets[i])
            )

    @classmethod
    def from_reports(cls, reports: Sequence[PerturbedReport]) -> "ReportBatch":
        if not reports:
            raise InvalidArgumentError("at least one report is required")
        ks = {r.k for r in reports}
        if len(ks) != 1:
            raise InvalidArgumentError(f"reports disagree on k: {sorted(ks)}")
        return cls(
            user_ids=[r.user_id for r in reports],
            samples=np.vstack([r.samples for r in reports]),
            band_offsets=[r.band_offset for r in reports],
        )


def as_batch(reports) -> ReportBatch:
    """Accept a ReportBatch or a sequence of PerturbedReport."""
    if isinstance(reports, ReportBatch):
        if len(reports) == 0:
            raise InvalidArgumentError("at least one report is required")
        return reports
    return ReportBatch.from_reports(list(reports))


class InterestGrid(_ArrayModel):
    """Points z_1 < ... < z_m plus the auxiliary z_{m+1} closing the last cell."""

    points: np.ndarray
    auxiliary: float

    @field_validator("points", mode="before")
    @classmethod
    def _as_array(cls, v):
        return _readonly(v, 1, "points")

    @model_validator(mode="after")
    def _check_order(self) -> "InterestGrid":
        if len(self.points) < 1:
            raise InvalidArgumentError("a grid needs at least one point")
        if np.any(np.diff(self.points) <= 0):
            raise InvalidArgumentError("grid points must be strictly increasing")
        if not self.auxiliary > self.points[-1]:
            raise InvalidArgumentError("auxiliary point must exceed the last grid point")
        return self

    @property
    def m(self) -> int:
        return len(self.points)

    @property
    def widths(self) -> np.ndarray:
        """Cell widths z_{i+1} - z_i, the last one closed by the auxiliary point."""
        return np.diff(np.append(self.points, self.auxiliary))

    def same_as(self, other: "InterestGrid") -> bool:
        return (
            self is other
            or (self.auxiliary == other.auxiliary and np.array_equal(self.points, other.points))
        )

    def within(self, data_range: DataRange) -> bool:
        return bool(np.all(data_range.contains(self.points)))


class DensityVector(_ArrayModel):
    grid: InterestGrid
    values: np.ndarray
    normalized: bool = False

    @field_validator("values", mode="before")
    @classmethod
    def _as_array(cls, v):
        return _readonly(v, 1, "values")

    @model_validator(mode="after")
    def _check_values(self) -> "DensityVector":
        if len(self.values) != self.grid.m:
            raise InvalidArgumentError(
                f"density has {len(self.values)} values for a grid of {self.grid.m} points"
            )
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError("densities must be finite and nonnegative")
        if self.normalized and abs(self.area() - 1.0) > NORMALIZATION_TOLERANCE:
            raise InvalidArgumentError(f"density flagged normalized has area {self.area():.9f}")
        return self

    def area(self) -> float:
        """Rectangular-rule integral sum_i v_i (z_{i+1} - z_i)."""
        return float(np.dot(self.values, self.grid.widths))

    def masses(self) -> np.ndarray:
        """Cell masses v_i * width_i renormalized to sum 1."""
        raw = self.values * self.grid.widths
        total = raw.sum()
        if total <= 0:
            raise InvalidArgumentError("density has zero mass")
        return raw / total

    def normalize(self) -> "DensityVector":
        area = self.area()
        if area <= 0:
            raise InvalidArgumentError("cannot normalize a density with zero area")
        return DensityVector(grid=self.grid, values=self.values / area, normalized=True)


class TransitionMatrix(_ArrayModel):
    """Discretized kernel: entries[j, i] = p(z_i, z_j), row = output, column = input."""

    grid: InterestGrid
    entries: np.ndarray

    @field_validator("entries", mode="before")
    @classmethod
    def _as_array(cls, v):
        return _readonly(v, 2, "entries")

    @model_validator(mode="after")
    def _check_entries(self) -> "TransitionMatrix":
        m = self.grid.m
        if self.entries.shape != (m, m):
            raise InvalidArgumentError(f"matrix must be {m}x{m}, got {self.entries.shape}")
        if np.any(self.entries < 0):
            raise InvalidArgumentError("transition entries must be nonnegative")
        return self

    def column_mass(self) -> np.ndarray:
        """Rectangular-rule integral of each column over the output grid."""
        return self.grid.widths @ self.entries


def make_uniform_grid(data_range: DataRange, m: int) -> InterestGrid:
    """
    Build m equally spaced points spanning [a, b], endpoints included.

    Args:
        data_range: the value domain
        m: number of grid points, at least 2

    Returns:
        InterestGrid whose auxiliary point extends the last spacing.
    """
    if m < 2:
        raise InvalidArgumentError(f"a uniform grid needs m >= 2, got {m}")
    points = np.linspace(data_range.a, data_range.b, m)
    step = points[-1] - points[-2]
    return InterestGrid(points=points, auxiliary=float(points[-1] + step))


def require_same_grid(first: InterestGrid, second: InterestGrid, what: Optional[str] = None) -> None:
    if not first.same_as(second):
        raise InvalidArgumentError(f"grid mismatch{f' in {what}' if what else ''}")
