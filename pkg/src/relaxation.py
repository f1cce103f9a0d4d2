"""
SDP relaxation of k-equi-MinCut / k-equi-MaxCut.

Solves

    min (or max)  1/2 tr(L Y)
    s.t.          diag(Y) = e_n,  Y e_n = m e_n,  Y >= 0 elementwise,  Y PSD

with cvxpy. For MinC the optimum is a lower bound on every equipartition
cut, for MaxC an upper bound.
"""

import time
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .constants import (
    RELAXATION_MAX_ITERS,
    RELAXATION_MIN_EIG,
    RELAXATION_MIN_ENTRY,
    RELAXATION_TOL,
)
from .exceptions import RelaxationError, ValidationError
from .logger import logger
from .partition import AffinityMatrix, Direction, laplacian, require_divisible

_ACCEPTED_STATUSES = (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)


@dataclass(frozen=True)
class SolverReport:
    """Diagnostics of one relaxation solve."""

    solver: str
    status: str
    iterations: int
    diag_residual: float
    row_sum_residual: float
    min_entry: float
    min_eigenvalue: float
    objective_gap: float
    solve_seconds: float

    @property
    def primal_residual(self) -> float:
        return max(self.diag_residual, self.row_sum_residual)


@dataclass(frozen=True, eq=False)
class RelaxationResult:
    Y: np.ndarray
    bound: float
    direction: Direction
    k: int
    report: SolverReport


def default_solver() -> str:
    """Interior-point solver when available, otherwise the first-order SCS."""
    installed = cp.installed_solvers()
    if cp.CLARABEL in installed:
        return cp.CLARABEL
    if cp.SCS in installed:
        return cp.SCS
    raise RelaxationError("No SDP-capable solver installed", {"installed": installed})


def _solver_options(solver: str, tol: float, max_iters: int) -> dict:
    if solver == cp.CLARABEL:
        inner = tol * 1e-2
        return {"max_iter": max_iters, "tol_feas": inner, "tol_gap_abs": inner, "tol_gap_rel": inner}
    if solver == cp.SCS:
        inner = tol * 1e-3
        return {"max_iters": max_iters, "eps_abs": inner, "eps_rel": inner}
    return {}


def _block_solution(n: int, k: int) -> np.ndarray:
    """Y = X X^t for the contiguous equipartition."""
    labels = np.repeat(np.arange(k), n // k)
    return (labels[:, None] == labels[None, :]).astype(np.float64)


def solve_relaxation(
    A: AffinityMatrix,
    k: int,
    direction: Direction | str,
    tol: float = RELAXATION_TOL,
    max_iters: int = RELAXATION_MAX_ITERS,
    solver: str | None = None,
) -> RelaxationResult:
    """
    Solve the SDP relaxation for k equal-size clusters.

    Raises:
        ValidationError: k < 2, k does not divide n, or tol <= 0
        RelaxationError: solver failure or a solution outside the feasibility tolerances
    """
    direction = Direction(direction)
    n = A.n
    if k < 2:
        raise ValidationError("Relaxation needs at least two clusters", {"k": k})
    m = require_divisible(n, k)
    if tol <= 0:
        raise ValidationError("Tolerance must be positive", {"tol": tol})

    if A.total_weight == 0.0:
        report = SolverReport("none", "trivial", 0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        logger.debug("relaxation.trivial", n=n, k=k)
        return RelaxationResult(Y=_block_solution(n, k), bound=0.0, direction=direction, k=k, report=report)

    L = laplacian(A)
    solver = solver or default_solver()

    Y = cp.Variable((n, n), symmetric=True)
    constraints = [Y >> 0, cp.diag(Y) == 1, Y @ np.ones(n) == m, Y >= 0]
    objective = 0.5 * cp.trace(L @ Y)
    sense = cp.Minimize(objective) if direction is Direction.MIN else cp.Maximize(objective)
    problem = cp.Problem(sense, constraints)

    started = time.perf_counter()
    try:
        problem.solve(solver=solver, **_solver_options(solver, tol, max_iters))
    except cp.SolverError as e:
        raise RelaxationError("SDP solver failed", {"solver": solver, "n": n, "k": k}, original_error=e) from e
    elapsed = time.perf_counter() - started

    iterations = int(problem.solver_stats.num_iters or 0) if problem.solver_stats else 0
    if problem.status not in _ACCEPTED_STATUSES or Y.value is None:
        report = SolverReport(solver, str(problem.status), iterations, np.inf, np.inf, -np.inf, -np.inf, np.inf, elapsed)
        raise RelaxationError(
            "SDP relaxation did not converge", {"status": problem.status, "n": n, "k": k}, report=report
        )

    raw = 0.5 * (Y.value + Y.value.T)
    min_entry = float(raw.min())
    # Entries within tolerance of zero are roundoff of the Y >= 0 constraint
    Yv = np.where((raw < 0) & (raw >= -tol), 0.0, raw)
    bound = 0.5 * float(np.sum(L * Yv))

    report = SolverReport(
        solver=solver,
        status=str(problem.status),
        iterations=iterations,
        diag_residual=float(np.max(np.abs(np.diag(Yv) - 1.0))),
        row_sum_residual=float(np.max(np.abs(Yv.sum(axis=1) - m))),
        min_entry=min_entry,
        min_eigenvalue=float(np.linalg.eigvalsh(Yv)[0]),
        objective_gap=abs(float(problem.value) - bound) / (1.0 + abs(bound)),
        solve_seconds=elapsed,
    )

    if (
        report.primal_residual > tol
        or float(Yv.min()) < RELAXATION_MIN_ENTRY
        or report.min_eigenvalue < RELAXATION_MIN_EIG
    ):
        raise RelaxationError(
            "SDP solution outside feasibility tolerance",
            {"diag": report.diag_residual, "rows": report.row_sum_residual, "min_eig": report.min_eigenvalue},
            report=report,
        )

    logger.debug(
        "relaxation.solved",
        n=n,
        k=k,
        direction=direction.value,
        bound=round(bound, 6),
        iterations=iterations,
        seconds=round(elapsed, 3),
    )
    return RelaxationResult(Y=Yv, bound=bound, direction=direction, k=k, report=report)
