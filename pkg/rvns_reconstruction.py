"""
RVNS reconstruction
Server-side recovery of the original density from perturbed reports:
transition matrix, KDE of the perturbed data, and the constrained
divergence-matching problem solved with SLSQP and polished by
active-set Gauss-Newton steps.
"""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.linalg import lstsq
from scipy.optimize import Bounds, brentq, minimize

from rvns_core import (
    NORMALIZATION_TOLERANCE,
    DensityVector,
    InterestGrid,
    PerturbationConfig,
    TransitionMatrix,
    as_batch,
    require_same_grid,
)
from rvns_errors import InfeasibleProblemError, InvalidArgumentError
from rvns_kde import KdeConfig, kde_at
from rvns_perturbation import kernel_density_array

logger = logging.getLogger(__name__)

STALL_ITERATIONS = 10
REFINE_ITERATIONS = 100
# smallest backtracking fraction tried before a refinement step is abandoned
MIN_STEP = 2.0 ** -40
ARMIJO = 1e-4
# densities closer than this to a box bound are put on the bound
BOUND_SNAP = 1e-12


class ReconstructionConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda1: float = 1e-3
    lambda2: float = 1e-3
    kl_floor: float = 1e-12
    max_iterations: int = 500
    constraint_tolerance: float = 1e-8
    objective_tolerance: float = 1e-12
    optimality_tolerance: float = 1e-12

    @model_validator(mode="after")
    def _check(self) -> "ReconstructionConfig":
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise InvalidArgumentError("regularization weights must be nonnegative")
        if self.kl_floor <= 0:
            raise InvalidArgumentError("kl_floor must be positive")
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be positive")
        if min(self.constraint_tolerance, self.objective_tolerance, self.optimality_tolerance) <= 0:
            raise InvalidArgumentError("tolerances must be positive")
        return self

    @classmethod
    def from_settings(cls, settings) -> "ReconstructionConfig":
        return cls(
            lambda1=settings.lambda1,
            lambda2=settings.lambda2,
            kl_floor=settings.kl_floor,
            max_iterations=settings.max_iterations,
            constraint_tolerance=settings.constraint_tolerance,
            objective_tolerance=settings.objective_tolerance,
            optimality_tolerance=settings.optimality_tolerance,
        )


class ReconstructionResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    density: DensityVector
    objective_value: float
    constraint_residual: float
    optimality_residual: float
    iterations: int
    converged: bool


def build_transition_matrix(grid: InterestGrid, config: PerturbationConfig) -> TransitionMatrix:
    """entries[j, i] = p(z_i, z_j): column i is the output density of input z_i."""
    if not grid.within(config.range):
        raise InvalidArgumentError("grid points must lie within the data range")
    z = grid.points
    entries = kernel_density_array(z[None, :], z[:, None], config)
    return TransitionMatrix(grid=grid, entries=entries)


def forward_map(matrix: TransitionMatrix, f: DensityVector) -> DensityVector:
    """g(z_j) = sum_i p(z_i, z_j) f(z_i) (z_{i+1} - z_i)."""
    require_same_grid(matrix.grid, f.grid, "forward_map")
    g = matrix.entries @ (f.values * matrix.grid.widths)
    return DensityVector(grid=matrix.grid, values=g)


class _Objective:
    """Symmetric KL between target and mapped cell masses plus L1/L2 penalties."""

    def __init__(self, matrix: TransitionMatrix, g_target: DensityVector, config: ReconstructionConfig):
        require_same_grid(matrix.grid, g_target.grid, "objective")
        self.entries = np.asarray(matrix.entries)
        self.widths = matrix.grid.widths
        self.config = config
        self.target = np.maximum(_unit_masses(g_target.values * self.widths), config.kl_floor)
        # cell masses of the mapped density: q = mass_map @ v
        self.mass_map = self.widths[:, None] * self.entries * self.widths[None, :]

    def _mapped(self, v: np.ndarray):
        q = self.widths * (self.entries @ (self.widths * v))
        total = max(q.sum(), np.finfo(float).tiny)
        probs = q / total
        return probs, np.maximum(probs, self.config.kl_floor), total

    def value(self, v: np.ndarray) -> float:
        _, mapped, _ = self._mapped(v)
        t = self.target
        # KL(t || m) + KL(m || t) summed termwise
        divergence = np.sum((t - mapped) * np.log(t / mapped))
        penalty = self.config.lambda1 * np.sum(np.abs(v)) + self.config.lambda2 * np.sum(v * v)
        return float(divergence + penalty)

    def _l1_slope(self, v: np.ndarray) -> np.ndarray:
        # one-sided at 0: the box keeps v nonnegative
        return self.config.lambda1 * np.where(v < 0, -1.0, 1.0)

    def gradient(self, v: np.ndarray) -> np.ndarray:
        probs, mapped, total = self._mapped(v)
        t = self.target
        d_mapped = np.log(mapped / t) + (mapped - t) / mapped
        d_probs = np.where(probs > self.config.kl_floor, d_mapped, 0.0)
        d_q = (d_probs - np.dot(d_probs, probs)) / total
        grad = self.widths * (self.entries.T @ (self.widths * d_q))
        return grad + self._l1_slope(v) + 2.0 * self.config.lambda2 * v

    def hessian(self, v: np.ndarray) -> np.ndarray:
        """Gauss-Newton curvature: exact in the mapped masses, first order in their normalization."""
        probs, mapped, total = self._mapped(v)
        curvature = np.where(probs > self.config.kl_floor, 1.0 / mapped + self.target / mapped ** 2, 0.0)
        jacobian = (self.mass_map - np.outer(probs, self.mass_map.sum(axis=0))) / total
        hess = jacobian.T @ (curvature[:, None] * jacobian)
        hess[np.diag_indices_from(hess)] += 2.0 * self.config.lambda2
        return hess


def _unit_masses(raw: np.ndarray) -> np.ndarray:
    total = raw.sum()
    if total <= 0:
        return np.full(len(raw), 1.0 / len(raw))
    return raw / total


def objective(
    v: DensityVector,
    g_target: DensityVector,
    matrix: TransitionMatrix,
    config: ReconstructionConfig,
) -> float:
    """
    KL(target || mapped) + KL(mapped || target) + lambda1 * sum|v| + lambda2 * sum v^2,
    with both distributions taken as floored cell masses.
    """
    require_same_grid(v.grid, matrix.grid, "objective")
    return _Objective(matrix, g_target, config).value(np.asarray(v.values))


def objective_gradient(
    v: DensityVector,
    g_target: DensityVector,
    matrix: TransitionMatrix,
    config: ReconstructionConfig,
) -> np.ndarray:
    require_same_grid(v.grid, matrix.grid, "objective_gradient")
    return _Objective(matrix, g_target, config).gradient(np.asarray(v.values))


def project_feasible(v, grid: InterestGrid) -> np.ndarray:
    """
    Euclidean projection onto {sum_i v_i w_i = 1, 0 <= v_i <= 1}.

    The solution is clip(v - tau * w, 0, 1) with tau found by root bracketing.
    """
    v = np.asarray(v, dtype=float)
    w = grid.widths
    if w.sum() < 1.0:
        raise InfeasibleProblemError(
            f"unit area is unreachable with densities <= 1: total width is {w.sum():.6g}"
        )

    def excess(tau: float) -> float:
        return float(np.dot(w, np.clip(v - tau * w, 0.0, 1.0)) - 1.0)

    low = float(np.min((v - 1.0) / w)) - 1.0
    high = float(np.max(v / w)) + 1.0
    tau = brentq(excess, low, high, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return np.clip(v - tau * w, 0.0, 1.0)


def _area_residual(v: np.ndarray, widths: np.ndarray) -> float:
    return abs(float(np.dot(v, widths)) - 1.0)


def _as_density(v: np.ndarray, grid: InterestGrid) -> DensityVector:
    normalized = _area_residual(v, grid.widths) <= NORMALIZATION_TOLERANCE
    return DensityVector(grid=grid, values=v, normalized=normalized)


def _kkt_violation(grad: np.ndarray, v: np.ndarray, widths: np.ndarray) -> np.ndarray:
    """
    Per-variable first-order violation for min f s.t. w.v = 1, 0 <= v <= 1.

    The area multiplier is the least-squares fit over the variables strictly
    inside the box.
    """
    free = (v > 0.0) & (v < 1.0)
    basis = free if free.any() else np.ones(len(v), dtype=bool)
    mu = -np.dot(widths[basis], grad[basis]) / np.dot(widths[basis], widths[basis])
    reduced = grad + mu * widths
    at_lower = np.maximum(-reduced, 0.0)
    at_upper = np.maximum(reduced, 0.0)
    return np.where(free, np.abs(reduced), np.where(v <= 0.0, at_lower, at_upper))


def optimality_residual(grad: np.ndarray, v: np.ndarray, widths: np.ndarray) -> float:
    """Max-norm of the projected gradient; 0 exactly at a first-order point."""
    return float(np.max(_kkt_violation(grad, v, widths)))


def _newton_step(hess: np.ndarray, grad: np.ndarray, widths: np.ndarray, free: np.ndarray) -> np.ndarray:
    # [H_FF  w_F] [s_F]   [-g_F]
    # [w_F^T  0 ] [mu ] = [  0 ]
    idx = np.flatnonzero(free)
    n = len(idx)
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = hess[np.ix_(idx, idx)]
    kkt[:n, n] = widths[idx]
    kkt[n, :n] = widths[idx]
    rhs = np.append(-grad[idx], 0.0)
    solution = lstsq(kkt, rhs)[0]
    step = np.zeros(len(grad))
    step[idx] = solution[:n]
    return step


def _step_limit(v: np.ndarray, step: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        down = np.where(step < 0, v / -step, np.inf)
        up = np.where(step > 0, (1.0 - v) / step, np.inf)
    return float(min(down.min(), up.min()))


def _snap_to_bounds(v: np.ndarray) -> np.ndarray:
    v = np.where(v < BOUND_SNAP, 0.0, v)
    return np.where(v > 1.0 - BOUND_SNAP, 1.0, v)


def _release_one(violation: np.ndarray, fixed: np.ndarray, tolerance: float) -> Optional[int]:
    candidates = np.where(fixed, violation, 0.0)
    worst = int(np.argmax(candidates))
    return worst if candidates[worst] > tolerance else None


def _refine(problem: "_Objective", v: np.ndarray, widths: np.ndarray, config: ReconstructionConfig):
    """
    Active-set Gauss-Newton polish of a feasible iterate.

    Each step solves the equality-constrained Newton system on the variables
    off the box bounds, then backtracks (Armijo) inside the box. A bound that
    stops a step becomes fixed; a fixed variable whose multiplier has the wrong
    sign is released once no further descent is found.

    Returns:
        (iterate, steps taken)
    """
    v = _snap_to_bounds(v)
    fixed = (v <= 0.0) | (v >= 1.0)
    value = problem.value(v)
    steps = 0
    released = None
    for _ in range(REFINE_ITERATIONS):
        grad = problem.gradient(v)
        step = _newton_step(problem.hessian(v), grad, widths, ~fixed) if not fixed.all() else np.zeros(len(v))
        blocked = ~fixed & (((v <= 0.0) & (step < 0.0)) | ((v >= 1.0) & (step > 0.0)))
        if blocked.any():
            if released is not None and blocked[released]:
                break
            fixed |= blocked
            continue
        slope = float(np.dot(grad, step))

        alpha = min(1.0, _step_limit(v, step))
        accepted = False
        if slope < 0.0:
            while alpha >= MIN_STEP:
                trial = np.clip(v + alpha * step, 0.0, 1.0)
                trial_value = problem.value(trial)
                if trial_value <= value + ARMIJO * alpha * slope:
                    accepted = True
                    break
                alpha /= 2.0

        if accepted:
            v = _snap_to_bounds(trial)
            value = problem.value(v)
            fixed |= (v <= 0.0) | (v >= 1.0)
            steps += 1
            released = None
            continue

        released = _release_one(_kkt_violation(grad, v, widths), fixed, config.optimality_tolerance)
        if released is None:
            break
        fixed[released] = False

    logger.debug("🔧 Refinement took %d steps (objective %.6g)", steps, value)
    return v, steps


def solve_reconstruction(
    matrix: TransitionMatrix,
    g_target: DensityVector,
    config: Optional[ReconstructionConfig] = None,
) -> ReconstructionResult:
    """
    Minimize the objective subject to unit area and 0 <= v_i <= 1.

    Non-convergence is reported through the result, never raised.
    """
    config = config or ReconstructionConfig()
    grid = matrix.grid
    require_same_grid(grid, g_target.grid, "solve_reconstruction")
    widths = grid.widths
    if widths.sum() < 1.0:
        raise InfeasibleProblemError(
            f"unit area is unreachable with densities <= 1: total width is {widths.sum():.6g}"
        )

    problem = _Objective(matrix, g_target, config)

    if grid.m == 1:
        v = np.array([1.0 / widths[0]])
        return ReconstructionResult(
            density=_as_density(v, grid),
            objective_value=problem.value(v),
            constraint_residual=_area_residual(v, widths),
            optimality_residual=0.0,
            iterations=0,
            converged=True,
        )

    v0 = project_feasible(np.full(grid.m, 1.0 / widths.sum()), grid)
    f0 = problem.value(v0)

    history = {"last": f0, "flat": 0, "stalled": False}

    def watch(vk: np.ndarray) -> None:
        fk = problem.value(vk)
        if abs(history["last"] - fk) < config.objective_tolerance:
            history["flat"] += 1
        else:
            history["flat"] = 0
        history["last"] = fk
        if history["flat"] >= STALL_ITERATIONS:
            history["stalled"] = True
            raise StopIteration

    logger.info("🔍 Solving reconstruction on %d grid points", grid.m)
    result = minimize(
        problem.value,
        v0,
        jac=problem.gradient,
        method="SLSQP",
        bounds=Bounds(np.zeros(grid.m), np.ones(grid.m)),
        constraints=[{"type": "eq", "fun": lambda v: np.dot(v, widths) - 1.0, "jac": lambda v: widths}],
        options={"maxiter": config.max_iterations, "ftol": config.objective_tolerance},
        callback=watch,
    )

    v = np.clip(result.x, 0.0, 1.0)
    if _area_residual(v, widths) > config.constraint_tolerance:
        v = project_feasible(v, grid)
    v, refine_steps = _refine(problem, v, widths, config)
    residual = _area_residual(v, widths)
    if residual > config.constraint_tolerance:
        v = project_feasible(v, grid)
        residual = _area_residual(v, widths)
    value = problem.value(v)
    kkt = optimality_residual(problem.gradient(v), v, widths)

    # a stalled SLSQP run still counts once the polished iterate is first-order optimal
    converged = residual <= config.constraint_tolerance and kkt <= config.optimality_tolerance
    if value > f0:
        logger.warning("⚠️ Solver ended above the initial objective; returning the initializer")
        v, value, residual, converged = v0, f0, _area_residual(v0, widths), False
        kkt = optimality_residual(problem.gradient(v0), v0, widths)

    iterations = int(result.nit) + refine_steps
    if converged:
        logger.info("✅ Reconstruction converged after %d iterations (objective %.6g)", iterations, value)
    else:
        reason = "stalled" if history["stalled"] else result.message
        logger.warning("⚠️ Reconstruction stopped without convergence (%s, first-order residual %.3g)", reason, kkt)

    return ReconstructionResult(
        density=_as_density(v, grid),
        objective_value=value,
        constraint_residual=residual,
        optimality_residual=kkt,
        iterations=iterations,
        converged=converged,
    )


def reconstruct(
    reports,
    grid: InterestGrid,
    pconfig: PerturbationConfig,
    kconfig: Optional[KdeConfig] = None,
    rconfig: Optional[ReconstructionConfig] = None,
) -> ReconstructionResult:
    """
    Recover the original-data density on grid from perturbed reports.

    Args:
        reports: ReportBatch or list of PerturbedReport
        grid: interest grid within [a, b]
        pconfig: the perturbation settings the reports were produced with
        kconfig: KDE settings for the perturbed density (Silverman by default)
        rconfig: solver settings

    Returns:
        ReconstructionResult
    """
    batch = as_batch(reports)
    samples = batch.pooled()
    if not np.all(pconfig.range.contains(samples)):
        raise InvalidArgumentError("reported samples must lie within the data range")
    if grid.widths.sum() < 1.0:
        raise InfeasibleProblemError(
            f"unit area is unreachable with densities <= 1: total width is {grid.widths.sum():.6g}"
        )

    logger.info("🔍 Reconstructing from %d reports (%d samples)", len(batch), len(samples))
    g_target = kde_at(grid, samples, kconfig or KdeConfig())
    matrix = build_transition_matrix(grid, pconfig)
    return solve_reconstruction(matrix, g_target, rconfig)
