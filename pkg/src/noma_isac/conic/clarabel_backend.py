"""Direct adapter from :class:`ConicProgram` to the Clarabel interior-point solver.

Clarabel solves ``min q'x  s.t.  A x + s = b,  s in K``. Each constraint kind
maps to one cone family:

* ``expr == 0``            -> zero cone, ``s = -expr``
* ``expr >= 0``            -> nonnegative cone, ``s = expr``
* ``||v|| <= t``           -> second-order cone, ``s = (t, v)``
* ``lhs <= log_b(arg)``    -> exponential cone, ``s = (lhs*ln b, 1, arg)``
* Hermitian block ``W``    -> PSD triangle cone of side ``2n`` on the real
  embedding of ``W`` (upper triangle, column-major, off-diagonals times sqrt 2)
"""

from __future__ import annotations

import math

import clarabel
import numpy as np
import scipy.sparse as sp

from .program import ConicProgram, ConstraintKind, VarKind, real_embedding_rows
from .solution import ConicSolution, SolveStatus

_SQRT2 = math.sqrt(2.0)

_STATUS = {
    "Solved": SolveStatus.OPTIMAL,
    "AlmostSolved": SolveStatus.OPTIMAL,
    "PrimalInfeasible": SolveStatus.INFEASIBLE,
    "AlmostPrimalInfeasible": SolveStatus.INFEASIBLE,
    "DualInfeasible": SolveStatus.UNBOUNDED,
    "AlmostDualInfeasible": SolveStatus.UNBOUNDED,
}


class _Rows:
    def __init__(self) -> None:
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []
        self.b: list[float] = []

    def add(self, coeffs: dict[int, float], rhs: float) -> None:
        r = len(self.b)
        for c, v in coeffs.items():
            if v != 0.0:
                self.rows.append(r)
                self.cols.append(c)
                self.vals.append(v)
        self.b.append(rhs)

    def add_slack(self, expr, scale: float = 1.0) -> None:
        # s = scale * expr  <=>  A = -scale*coeffs, b = scale*const
        self.add({i: -scale * c for i, c in expr.coeffs.items()}, scale * expr.const)


def assemble(program: ConicProgram):
    """Return ``(P, q, A, b, cones)`` for Clarabel."""
    program.validate()
    n = program.n_coords
    rows = _Rows()
    cones = []

    eqs = [c for c in program.constraints if c.kind is ConstraintKind.EQ]
    ges = [c for c in program.constraints if c.kind is ConstraintKind.GE]
    socs = [c for c in program.constraints if c.kind is ConstraintKind.SOC]
    logs = [c for c in program.constraints if c.kind is ConstraintKind.LOG]

    if eqs:
        for c in eqs:
            rows.add_slack(c.exprs[0], -1.0)
        cones.append(clarabel.ZeroConeT(len(eqs)))
    if ges:
        for c in ges:
            rows.add_slack(c.exprs[0])
        cones.append(clarabel.NonnegativeConeT(len(ges)))
    for c in socs:
        for e in c.exprs:
            rows.add_slack(e)
        cones.append(clarabel.SecondOrderConeT(len(c.exprs)))
    for c in logs:
        lhs, arg = c.exprs
        rows.add_slack(lhs, math.log(c.base))
        rows.add({}, 1.0)
        rows.add_slack(arg)
        cones.append(clarabel.ExponentialConeT())
    for var in program.variables:
        if var.kind is not VarKind.HERM:
            continue
        side = 2 * var.size
        emb = iter(real_embedding_rows(var.size))
        for col in range(side):
            for r in range(col + 1):
                scale = 1.0 if r == col else _SQRT2
                rows.add({var.offset + i: -scale * v for i, v in next(emb).items()}, 0.0)
        cones.append(clarabel.PSDTriangleConeT(side))

    m = len(rows.b)
    A = sp.csc_matrix((rows.vals, (rows.rows, rows.cols)), shape=(m, n))
    b = np.array(rows.b, dtype=float)
    q = -program.objective.dense(n)
    P = sp.csc_matrix((n, n))
    return P, q, A, b, cones


def solve(program: ConicProgram, tol: float = 1e-8, max_iter: int = 200) -> ConicSolution:
    P, q, A, b, cones = assemble(program)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.tol_ktratio = min(1e-6, tol * 100)
    settings.presolve_enable = False
    try:
        result = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
    except Exception as exc:  # solver-level panics surface as Python exceptions
        return ConicSolution(SolveStatus.NUMERICAL_TROUBLE, None, math.nan,
                             backend="clarabel", message=str(exc), tolerance=tol)

    raw = str(result.status)
    status = _STATUS.get(raw, SolveStatus.NUMERICAL_TROUBLE)
    x = np.asarray(result.x, dtype=float)
    objective = program.objective.evaluate(x) if x.size == program.n_coords else math.nan
    sol = ConicSolution(
        status=status,
        x=x,
        objective=objective,
        tolerance=tol,
        iterations=int(result.iterations),
        backend="clarabel",
        message=raw,
    )
    if status is SolveStatus.OPTIMAL:
        sol.values = program.values(x)
        sol.max_violation = program.max_violation(x)
        if not _within_tolerance(program, x, sol.max_violation, tol):
            sol.status = SolveStatus.NUMERICAL_TROUBLE
            sol.message = f"{raw}; max violation {sol.max_violation:.3e}"
    return sol


def _within_tolerance(program: ConicProgram, x: np.ndarray, violation: float, tol: float) -> bool:
    # Clarabel's feasibility test is relative to the data and iterate scale.
    scale = 1.0 + max(float(np.max(np.abs(x), initial=0.0)),
                      max((abs(e.const) for c in program.constraints for e in c.exprs), default=0.0))
    return violation <= 100.0 * tol * scale
