"""
RVNS experiment
Privacy-utility sweep: runs perturb -> reconstruct -> attack -> evaluate for
RVNS over a sweep of band widths and for noise baselines over a sweep of
scales, averaging over repetitions.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from rvns_attack import infer_batch, privacy_distance
from rvns_baselines import Mechanism, NoiseConfig, baseline_privacy, calibrate_scale, perturb_noise_batch
from rvns_core import DataRange, Dataset, DensityVector, InterestGrid, PerturbationConfig, make_uniform_grid
from rvns_data import generate_chi_squared, read_dataset
from rvns_errors import ConfigError, DatasetIOError, RvnsError
from rvns_kde import KdeConfig, kde_at
from rvns_metrics import indicator_error, wasserstein1
from rvns_perturbation import perturb_batch
from rvns_reconstruction import ReconstructionConfig, reconstruct

logger = logging.getLogger(__name__)

TABLE_COLUMNS = [
    "mechanism",
    "param",
    "privacy_distance",
    "wasserstein",
    "mean_err",
    "std_err",
    "mode_err",
    "median_err",
    "skew_err",
    "kurt_err",
    "runtime_s",
]

MECHANISM_CODES = {"rvns": 0, "laplace": 1, "gaussian": 2}


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dataset: Literal["chi2", "csv"] = "chi2"
    df: int = 2
    n: int = 50_000
    csv_path: Optional[str] = None
    value_column: str = "value"
    a: float = 0.0
    b: float = 10.0
    m: int = 100
    k: int = 5
    d_sweep: List[float] = []
    baselines: List[Mechanism] = []
    baseline_scales: List[float] = []
    match_baselines: bool = False
    include_raw: bool = False
    repetitions: int = 11
    seed: int = 0
    grid_resolution: int = 1000
    lambda1: float = 1e-3
    lambda2: float = 1e-3
    max_iterations: int = 500
    workers: int = 1
    record_runtime: bool = True

    @field_validator("d_sweep", "baseline_scales", "baselines", mode="before")
    @classmethod
    def _split_list(cls, v):
        if isinstance(v, str):
            return [item.strip() for item in v.split(",") if item.strip()]
        return v

    @property
    def data_range(self) -> DataRange:
        return DataRange(a=self.a, b=self.b)


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """Parse a flat KEY=VALUE file; keys are case-insensitive."""
    path = Path(path)
    if not path.is_file():
        raise DatasetIOError(f"experiment config not found: {path}")
    raw = {key.lower(): value for key, value in dotenv_values(path).items() if value is not None}
    try:
        config = ExperimentConfig(**raw)
    except ValidationError as e:
        raise ConfigError(f"malformed experiment config {path}: {e}") from e
    except RvnsError as e:
        raise ConfigError(f"malformed experiment config {path}: {e}") from e
    if config.dataset == "csv" and not config.csv_path:
        raise ConfigError("DATASET=csv requires CSV_PATH")
    if config.repetitions < 1:
        raise ConfigError("REPETITIONS must be positive")
    return config


class Job(BaseModel):
    model_config = ConfigDict(frozen=True)

    mechanism: str
    param_index: int
    param: float
    repetition: int


def _dataset(config: ExperimentConfig, repetition: int) -> Dataset:
    if config.dataset == "csv":
        return read_dataset(config.csv_path, config.data_range, config.value_column).dataset
    rng = np.random.default_rng([config.seed, 0, repetition])
    return generate_chi_squared(config.df, config.n, config.data_range, rng)


def _reference(config: ExperimentConfig, data: Dataset) -> Tuple[InterestGrid, DensityVector]:
    grid = make_uniform_grid(config.data_range, config.m)
    return grid, kde_at(grid, data.values, KdeConfig()).normalize()


def _utility_row(job: Job, privacy: float, density: DensityVector, reference: DensityVector,
                 data: Dataset, rng: np.random.Generator, elapsed: float) -> Dict:
    errors = indicator_error(data, density, len(data), rng)
    return {
        "mechanism": job.mechanism,
        "param": job.param,
        "privacy_distance": privacy,
        "wasserstein": wasserstein1(density, reference),
        "mean_err": errors.mean,
        "std_err": errors.std_dev,
        "mode_err": errors.mode,
        "median_err": errors.median,
        "skew_err": errors.skewness,
        "kurt_err": errors.kurtosis,
        "runtime_s": elapsed,
    }


def run_job(config: ExperimentConfig, job: Job) -> List[Dict]:
    """Run one (mechanism, param, repetition) point; returns one or two table rows."""
    data = _dataset(config, job.repetition)
    grid, reference = _reference(config, data)
    rng = np.random.default_rng(
        [config.seed, MECHANISM_CODES[job.mechanism], job.param_index, job.repetition]
    )
    started = time.perf_counter()

    if job.mechanism == "rvns":
        pconfig = PerturbationConfig(range=config.data_range, d=job.param, k=config.k)
        batch = perturb_batch(data.values, pconfig, rng)
        result = reconstruct(
            batch,
            grid,
            pconfig,
            KdeConfig(),
            ReconstructionConfig(
                lambda1=config.lambda1, lambda2=config.lambda2, max_iterations=config.max_iterations
            ),
        )
        inferred, _ = infer_batch(batch.samples, pconfig, config.grid_resolution)
        privacy = privacy_distance(data, inferred)
        density = result.density.normalize()
        raw = kde_at(grid, batch.pooled(), KdeConfig()).normalize() if config.include_raw else None
    else:
        noise = NoiseConfig(mechanism=job.mechanism, scale=job.param)
        noisy = perturb_noise_batch(data.values, noise, data.range, rng)
        privacy = baseline_privacy(data, noisy)
        density = kde_at(grid, noisy, KdeConfig()).normalize()
        raw = None

    elapsed = time.perf_counter() - started if config.record_runtime else 0.0
    rows = [_utility_row(job, privacy, density, reference, data, rng, elapsed)]
    if raw is not None:
        raw_job = job.model_copy(update={"mechanism": "rvns_raw"})
        rows.append(_utility_row(raw_job, privacy, raw, reference, data, rng, elapsed))
    return rows


def _run_jobs(config: ExperimentConfig, jobs: List[Job]) -> List[Dict]:
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(run_job, [config] * len(jobs), jobs))
    else:
        results = [run_job(config, job) for job in jobs]
    return [row for rows in results for row in rows]


def _average(rows: List[Dict]) -> pd.DataFrame:
    if not rows:
        return pd.DataFrame(columns=TABLE_COLUMNS)
    frame = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    # keep first-seen (mechanism, param) order
    return frame.groupby(["mechanism", "param"], sort=False, as_index=False).mean()[TABLE_COLUMNS]


def run_experiment(config: ExperimentConfig) -> pd.DataFrame:
    """
    Build the tradeoff table: one averaged row per (mechanism, param).
    """
    logger.info(
        "🔍 Running sweep: %d band widths, %d baselines, %d repetitions",
        len(config.d_sweep), len(config.baselines), config.repetitions,
    )
    repetitions = range(config.repetitions)
    jobs = [
        Job(mechanism="rvns", param_index=i, param=d, repetition=r)
        for i, d in enumerate(config.d_sweep)
        for r in repetitions
    ]
    rows = _run_jobs(config, jobs)

    if config.match_baselines:
        rvns_privacy = _average([row for row in rows if row["mechanism"] == "rvns"])
        data = _dataset(config, 0)
        scales = [
            calibrate_scale(data, mechanism, float(target), seed=config.seed)
            for mechanism in config.baselines
            for target in rvns_privacy["privacy_distance"]
        ]
        per_mechanism = len(rvns_privacy)
        baseline_jobs = [
            Job(mechanism=mechanism, param_index=i, param=scales[j * per_mechanism + i], repetition=r)
            for j, mechanism in enumerate(config.baselines)
            for i in range(per_mechanism)
            for r in repetitions
        ]
    else:
        baseline_jobs = [
            Job(mechanism=mechanism, param_index=i, param=scale, repetition=r)
            for mechanism in config.baselines
            for i, scale in enumerate(config.baseline_scales)
            for r in repetitions
        ]
    rows += _run_jobs(config, baseline_jobs)

    table = _average(rows)
    logger.info("✅ Sweep finished with %d table rows", len(table))
    return table


def write_table(table: pd.DataFrame, path: Union[str, Path]) -> None:
    table.to_csv(path, index=False, float_format="%.10g")
