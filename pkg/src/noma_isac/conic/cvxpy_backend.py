"""Reference adapter through cvxpy, used to cross-check the direct Clarabel path.

Hermitian blocks are handed to cvxpy as native ``hermitian=True`` variables,
so this path shares none of the real-embedding bookkeeping of the direct
adapter.
"""

from __future__ import annotations

import math

import cvxpy as cp
import numpy as np

from .program import ConicProgram, ConstraintKind, VarKind, coords_from_hermitian, upper_pairs
from .solution import ConicSolution, SolveStatus

_STATUS = {
    cp.OPTIMAL: SolveStatus.OPTIMAL,
    cp.OPTIMAL_INACCURATE: SolveStatus.OPTIMAL,
    cp.INFEASIBLE: SolveStatus.INFEASIBLE,
    cp.INFEASIBLE_INACCURATE: SolveStatus.INFEASIBLE,
    cp.UNBOUNDED: SolveStatus.UNBOUNDED,
    cp.UNBOUNDED_INACCURATE: SolveStatus.UNBOUNDED,
}


def _coordinate_exprs(program: ConicProgram):
    coords: list = [None] * program.n_coords
    cvars = {}
    for var in program.variables:
        if var.kind is VarKind.SCALAR:
            v = cp.Variable(name=var.name)
            coords[var.offset] = v
        else:
            v = cp.Variable((var.size, var.size), hermitian=True, name=var.name)
            n = var.size
            for a in range(n):
                coords[var.offset + a] = cp.real(v[a, a])
            for p, (a, b) in enumerate(upper_pairs(n)):
                coords[var.offset + n + 2 * p] = cp.real(v[a, b])
                coords[var.offset + n + 2 * p + 1] = cp.imag(v[a, b])
        cvars[var.name] = v
    return coords, cvars


def _affine(expr, coords):
    out = expr.const
    terms = [c * coords[i] for i, c in expr.coeffs.items() if c != 0.0]
    if terms:
        out = cp.sum(cp.hstack(terms)) + expr.const
    return out


def solve(program: ConicProgram, tol: float = 1e-8, solver: str = "CLARABEL") -> ConicSolution:
    program.validate()
    coords, cvars = _coordinate_exprs(program)
    cons = []
    for var in program.variables:
        if var.kind is VarKind.HERM:
            cons.append(cvars[var.name] >> 0)
    for c in program.constraints:
        ex = [_affine(e, coords) for e in c.exprs]
        if c.kind is ConstraintKind.EQ:
            cons.append(ex[0] == 0)
        elif c.kind is ConstraintKind.GE:
            cons.append(ex[0] >= 0)
        elif c.kind is ConstraintKind.SOC:
            cons.append(cp.SOC(ex[0], cp.hstack(ex[1:])))
        else:
            cons.append(ex[0] * math.log(c.base) <= cp.log(ex[1]))
    prob = cp.Problem(cp.Maximize(_affine(program.objective, coords)), cons)
    kwargs = {}
    if solver == "CLARABEL":
        kwargs = dict(tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol)
    elif solver == "SCS":
        kwargs = dict(eps_abs=tol, eps_rel=tol, max_iters=200000)
    try:
        prob.solve(solver=solver, **kwargs)
    except cp.SolverError as exc:
        return ConicSolution(SolveStatus.NUMERICAL_TROUBLE, None, math.nan,
                             backend=f"cvxpy/{solver}", message=str(exc), tolerance=tol)

    status = _STATUS.get(prob.status, SolveStatus.NUMERICAL_TROUBLE)
    sol = ConicSolution(status=status, x=None, objective=math.nan, tolerance=tol,
                        backend=f"cvxpy/{solver}", message=str(prob.status))
    if status is SolveStatus.OPTIMAL:
        x = np.zeros(program.n_coords)
        for var in program.variables:
            val = cvars[var.name].value
            if var.kind is VarKind.SCALAR:
                x[var.offset] = float(val)
            else:
                x[var.offset:var.offset + var.ncoords] = coords_from_hermitian(val)
        sol.x = x
        sol.objective = program.objective.evaluate(x)
        sol.values = program.values(x)
        sol.max_violation = program.max_violation(x)
    return sol
