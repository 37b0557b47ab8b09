#!/usr/bin/env python3
"""
RVNS command line
Subcommands wiring the negative-survey pipeline end to end:
generate, perturb, reconstruct, attack, evaluate, experiment and budget.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

import numpy as np

from rvns_attack import attack, privacy_distance
from rvns_core import DataRange, PerturbationConfig, make_uniform_grid
from rvns_data import generate_chi_squared, read_dataset, write_dataset
from rvns_errors import (
    ConfigError,
    DatasetIOError,
    EmptyDatasetError,
    InfeasibleProblemError,
    InvalidArgumentError,
)
from rvns_experiment import load_experiment_config, run_experiment, write_table
from rvns_io import (
    indicators_to_dict,
    read_density_json,
    read_reports,
    write_attack_csv,
    write_density_csv,
    write_json,
    write_reconstruction_json,
    write_reports,
)
from rvns_kde import KdeConfig, kde_at
from rvns_metrics import indicator_error, wasserstein1
from rvns_perturbation import ldp_budget, perturb_batch
from rvns_reconstruction import ReconstructionConfig, reconstruct
from settings import configure_logging, load_settings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2


def _add_range(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--a", type=float, required=True, help="domain lower bound")
    parser.add_argument("--b", type=float, required=True, help="domain upper bound")


def _add_band(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--d", type=float, required=True, help="prohibited band width")


def cmd_generate(args) -> int:
    data = generate_chi_squared(args.df, args.n, DataRange(a=args.a, b=args.b), np.random.default_rng(args.seed))
    write_dataset(data, args.out)
    print(f"✅ Wrote {len(data)} values to {args.out}")
    return EXIT_OK


def cmd_perturb(args) -> int:
    data_range = DataRange(a=args.a, b=args.b)
    loaded = read_dataset(args.input, data_range, args.column)
    config = PerturbationConfig(range=data_range, d=args.d, k=args.k)
    batch = perturb_batch(loaded.dataset.values, config, np.random.default_rng(args.seed))
    write_reports(batch, args.out, diagnostic=args.diagnostic)
    print(f"✅ Wrote {len(batch) * batch.k} perturbed samples of {len(batch)} users to {args.out}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    settings = load_settings()
    data_range = DataRange(a=args.a, b=args.b)
    batch = read_reports(args.reports)
    config = PerturbationConfig(range=data_range, d=args.d, k=batch.k)
    rconfig = ReconstructionConfig.from_settings(settings)
    if args.lambda1 is not None or args.lambda2 is not None:
        rconfig = ReconstructionConfig(
            **{
                **rconfig.model_dump(),
                "lambda1": rconfig.lambda1 if args.lambda1 is None else args.lambda1,
                "lambda2": rconfig.lambda2 if args.lambda2 is None else args.lambda2,
            }
        )
    kconfig = KdeConfig(bandwidth=args.bandwidth)
    result = reconstruct(batch, make_uniform_grid(data_range, args.m), config, kconfig, rconfig)
    write_reconstruction_json(result, args.out)
    if args.density_csv:
        write_density_csv(result.density, args.density_csv)
    status = "converged" if result.converged else "not converged"
    print(f"✅ Wrote density on {args.m} points to {args.out} ({status}, {result.iterations} iterations)")
    return EXIT_OK


def cmd_attack(args) -> int:
    data_range = DataRange(a=args.a, b=args.b)
    batch = read_reports(args.reports)
    config = PerturbationConfig(range=data_range, d=args.d, k=batch.k)
    resolution = args.grid_resolution if args.grid_resolution is not None else load_settings().grid_resolution
    result = attack(batch, config, resolution, args.tie_rule)
    write_attack_csv(result, args.out)
    print(f"✅ Wrote inferred values of {len(batch)} users to {args.out}")
    if args.original:
        original = read_dataset(args.original, data_range, args.column).dataset
        print(f"🔐 Privacy distance: {privacy_distance(original, result.inferred):.6g}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    density = read_density_json(args.density).normalize()
    grid = density.grid
    data_range = DataRange(a=args.a if args.a is not None else float(grid.points[0]),
                           b=args.b if args.b is not None else float(grid.points[-1]))
    original = read_dataset(args.original, data_range, args.column).dataset
    reference = kde_at(grid, original.values, KdeConfig()).normalize()
    errors = indicator_error(original, density, len(original), np.random.default_rng(args.seed))
    payload = {
        "wasserstein": wasserstein1(density, reference),
        "wasserstein_scaled": wasserstein1(density, reference, scaled=True),
        "indicator_errors": indicators_to_dict(errors),
    }
    write_json(payload, args.out)
    print(f"✅ W1 = {payload['wasserstein']:.6g}; metrics written to {args.out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    config = load_experiment_config(args.config)
    table = run_experiment(config)
    write_table(table, args.out)
    print(f"✅ Wrote {len(table)} rows to {args.out}")
    return EXIT_OK


def cmd_budget(args) -> int:
    config = PerturbationConfig(range=DataRange(a=args.a, b=args.b), d=args.d, k=args.k)
    budget = ldp_budget(config, args.delta)
    print(f"🔐 epsilon = {budget.epsilon:.6g} (k={budget.k}, d={budget.d:g}, delta={budget.delta_neighborhood:g})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rvns", description="Real-value negative survey toolkit")
    parser.add_argument("--log-level", default=None, help="override RVNS_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a truncated chi-squared dataset")
    _add_range(p)
    p.add_argument("--df", type=int, default=2)
    p.add_argument("--n", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("perturb", help="perturb every value of a dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--column", default="value")
    _add_range(p)
    _add_band(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--diagnostic", action="store_true", help="include band_offset column")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_perturb)

    p = sub.add_parser("reconstruct", help="reconstruct the original density from reports")
    p.add_argument("--reports", required=True)
    _add_range(p)
    _add_band(p)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--bandwidth", type=float, default=None)
    p.add_argument("--lambda1", type=float, default=None)
    p.add_argument("--lambda2", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--density-csv", default=None, help="also write z,density rows")
    p.set_defaults(handler=cmd_reconstruct)

    p = sub.add_parser("attack", help="infer private values from reports")
    p.add_argument("--reports", required=True)
    _add_range(p)
    _add_band(p)
    p.add_argument("--grid-resolution", type=int, default=None, help="defaults to RVNS_GRID_RESOLUTION")
    p.add_argument("--tie-rule", choices=["smallest", "centroid"], default="smallest")
    p.add_argument("--original", default=None, help="dataset to report the privacy distance against")
    p.add_argument("--column", default="value")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_attack)

    p = sub.add_parser("evaluate", help="compare a reconstructed density with the original data")
    p.add_argument("--original", required=True)
    p.add_argument("--density", required=True)
    p.add_argument("--column", default="value")
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a privacy-utility sweep")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser("budget", help="print the local differential privacy budget")
    _add_range(p)
    _add_band(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--delta", type=float, required=True)
    p.set_defaults(handler=cmd_budget)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level or load_settings().log_level)
    try:
        return args.handler(args)
    except (InvalidArgumentError, ConfigError, InfeasibleProblemError) as e:
        logger.debug("command %s rejected", args.command, exc_info=True)
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetIOError, EmptyDatasetError, OSError) as e:
        logger.debug("command %s failed on I/O", args.command, exc_info=True)
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
