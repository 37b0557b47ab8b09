"""
RVNS file formats
CSV and JSON readers/writers for reports, densities, reconstruction results,
attack results and indicator sets.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Dict, Union

import numpy as np
import pandas as pd

from rvns_attack import AttackResult
from rvns_core import DensityVector, InterestGrid, ReportBatch
from rvns_errors import DatasetIOError, EmptyDatasetError
from rvns_metrics import IndicatorSet
from rvns_reconstruction import ReconstructionResult

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.17g"


def _read_frame(path: PathLike, required, **kwargs) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, encoding="utf-8", **kwargs)
    except FileNotFoundError as e:
        raise DatasetIOError(f"file not found: {path}") from e
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetIOError(f"cannot read {path}: {e}") from e
    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise DatasetIOError(f"{path} lacks columns {missing}")
    return frame


def write_reports(batch: ReportBatch, path: PathLike, diagnostic: bool = False) -> None:
    """One row per sample: user_id,sample_index,value[,band_offset]."""
    n, k = batch.samples.shape
    frame = pd.DataFrame(
        {
            "user_id": np.repeat(np.asarray(batch.user_ids, dtype=object), k),
            "sample_index": np.tile(np.arange(k), n),
            "value": batch.samples.reshape(-1),
        }
    )
    if diagnostic:
        frame["band_offset"] = np.repeat(batch.band_offsets, k)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_reports(path: PathLike) -> ReportBatch:
    frame = _read_frame(path, ["user_id", "sample_index", "value"], dtype={"user_id": str})
    if frame.empty:
        raise EmptyDatasetError(f"{path} holds no reports")
    order = pd.unique(frame["user_id"])
    frame["user_order"] = frame["user_id"].map({user: i for i, user in enumerate(order)})
    frame = frame.sort_values(["user_order", "sample_index"], kind="stable")
    sizes = frame.groupby("user_order", sort=True).size()
    if sizes.nunique() != 1:
        raise DatasetIOError(f"{path}: users report different numbers of samples")
    k = int(sizes.iloc[0])
    samples = frame["value"].to_numpy(dtype=float).reshape(len(order), k)
    if "band_offset" in frame.columns:
        offsets = frame.groupby("user_order", sort=True)["band_offset"].first().to_numpy(dtype=float)
    else:
        offsets = np.full(len(order), np.nan)
    return ReportBatch(user_ids=[str(u) for u in order], samples=samples, band_offsets=offsets)


def write_density_csv(density: DensityVector, path: PathLike) -> None:
    pd.DataFrame({"z": density.grid.points, "density": density.values}).to_csv(
        path, index=False, float_format=FLOAT_FORMAT
    )


def reconstruction_to_dict(result: ReconstructionResult) -> Dict:
    grid = result.density.grid
    return {
        "grid": [float(z) for z in grid.points],
        "auxiliary": float(grid.auxiliary),
        "density": [float(v) for v in result.density.values],
        "objective": float(result.objective_value),
        "constraint_residual": float(result.constraint_residual),
        "optimality_residual": float(result.optimality_residual),
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
    }


def write_reconstruction_json(result: ReconstructionResult, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(reconstruction_to_dict(result), f, indent=2)


def read_density_json(path: PathLike) -> DensityVector:
    """Load the density of a reconstruction JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except FileNotFoundError as e:
        raise DatasetIOError(f"file not found: {path}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise DatasetIOError(f"cannot read {path}: {e}") from e
    try:
        points = np.asarray(payload["grid"], dtype=float)
        values = np.asarray(payload["density"], dtype=float)
    except KeyError as e:
        raise DatasetIOError(f"{path} lacks key {e}") from e
    auxiliary = payload.get("auxiliary")
    if auxiliary is None:
        auxiliary = points[-1] + (points[-1] - points[-2] if len(points) > 1 else 1.0)
    grid = InterestGrid(points=points, auxiliary=float(auxiliary))
    return DensityVector(grid=grid, values=values)


def write_attack_csv(result: AttackResult, path: PathLike) -> None:
    pd.DataFrame(
        {
            "user_id": result.user_ids,
            "x_infer": result.inferred.values,
            "log_likelihood": result.log_likelihoods,
        }
    ).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def _finite_or_none(value: float):
    return value if math.isfinite(value) else None


def write_json(payload: Dict, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=False)


def indicators_to_dict(indicators: IndicatorSet) -> Dict:
    return {name: _finite_or_none(value) for name, value in indicators.model_dump().items()}
