"""Convex conic subproblem representation and solver adapters."""

from __future__ import annotations

from .program import Affine, ConicProgram, Constraint, ConstraintKind, Variable, VarKind, sum_affine
from .solution import ConicSolution, SolveStatus
from .textio import dumps, loads

DEFAULT_TOL = 1e-8

__all__ = [
    "Affine", "ConicProgram", "Constraint", "ConstraintKind", "Variable", "VarKind",
    "ConicSolution", "SolveStatus", "DEFAULT_TOL", "dumps", "loads", "solve_conic", "sum_affine",
]


def solve_conic(program: ConicProgram, tol: float = DEFAULT_TOL, backend: str = "clarabel") -> ConicSolution:
    """Solve ``program`` (a maximization) to accuracy ``tol``.

    ``backend`` is ``"clarabel"`` (direct assembly, the default) or
    ``"cvxpy"`` (modelling-layer route, slower; used for cross-checks).
    Infeasible/unbounded outcomes are reported through the status field.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if backend == "clarabel":
        from . import clarabel_backend
        return clarabel_backend.solve(program, tol)
    if backend == "cvxpy":
        from . import cvxpy_backend
        return cvxpy_backend.solve(program, tol)
    raise ValueError(f"unknown backend {backend!r}")
