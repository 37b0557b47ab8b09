"""
RVNS data
Synthetic chi-squared datasets and CSV ingestion of real data.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from rvns_core import DataRange, Dataset
from rvns_errors import DatasetIOError, EmptyDatasetError, InvalidArgumentError

logger = logging.getLogger(__name__)


class LoadedDataset(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    dataset: Dataset
    total_rows: int
    retained_rows: int

    @property
    def retention(self) -> float:
        return self.retained_rows / self.total_rows if self.total_rows else 0.0


def generate_chi_squared(df: int, n: int, data_range: DataRange, rng: np.random.Generator) -> Dataset:
    """
    Draw n values from chi-squared(df) restricted to [a, b].

    Out-of-range draws are redrawn, so the result follows the truncated
    distribution without boundary atoms.
    """
    if df < 1 or n < 1:
        raise InvalidArgumentError(f"df and n must be positive, got df={df}, n={n}")
    kept = []
    remaining = n
    while remaining > 0:
        # oversample a little so most calls need one round
        draws = rng.chisquare(df, size=max(2 * remaining, 64))
        draws = draws[(draws >= data_range.a) & (draws <= data_range.b)][:remaining]
        kept.append(draws)
        remaining -= len(draws)
    values = np.concatenate(kept)
    logger.info("🎲 Generated %d chi-squared(%d) values in [%g, %g]", n, df, data_range.a, data_range.b)
    return Dataset(range=data_range, values=values)


def _retain(column: pd.Series, data_range: DataRange, path: Path) -> LoadedDataset:
    values = pd.to_numeric(column, errors="coerce").to_numpy(dtype=float)
    total = len(values)
    values = values[np.isfinite(values)]
    values = values[(values >= data_range.a) & (values <= data_range.b)]
    if len(values) == 0:
        raise EmptyDatasetError(f"no values of {path} fall within [{data_range.a}, {data_range.b}]")

    logger.info("📂 Loaded %d of %d rows from %s", len(values), total, path)
    return LoadedDataset(
        dataset=Dataset(range=data_range, values=values),
        total_rows=total,
        retained_rows=len(values),
    )


def load_csv(path: Union[str, Path], value_column: str, data_range: DataRange) -> LoadedDataset:
    """
    Read one column of a CSV file, dropping missing, unparseable and out-of-range rows.

    Args:
        path: CSV file with a header row
        value_column: name of the column holding the values
        data_range: the domain rows must fall in

    Returns:
        LoadedDataset with the retained values and row counts
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except FileNotFoundError as e:
        raise DatasetIOError(f"data file not found: {path}") from e
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DatasetIOError(f"cannot read {path}: {e}") from e

    if value_column not in frame.columns:
        raise DatasetIOError(f"column '{value_column}' not in {path} (columns: {list(frame.columns)})")

    return _retain(frame[value_column], data_range, path)


def _first_line(path: Path) -> str:
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    return line.strip()
    except FileNotFoundError as e:
        raise DatasetIOError(f"data file not found: {path}") from e
    except OSError as e:
        raise DatasetIOError(f"cannot read {path}: {e}") from e
    raise EmptyDatasetError(f"{path} is empty")


def read_dataset(path: Union[str, Path], data_range: DataRange, value_column: str = "value") -> LoadedDataset:
    """Read either plain text (one value per line) or a CSV with a header."""
    path = Path(path)
    try:
        float(_first_line(path))
    except ValueError:
        return load_csv(path, value_column, data_range)

    frame = pd.read_csv(path, header=None, names=[value_column], encoding="utf-8")
    return _retain(frame[value_column], data_range, path)


def write_dataset(dataset: Dataset, path: Union[str, Path]) -> None:
    pd.DataFrame({"value": dataset.values}).to_csv(path, index=False, float_format="%.17g")
