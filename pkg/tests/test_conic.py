import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noma_isac.conic import (
    Affine,
    ConicProgram,
    SolveStatus,
    solve_conic,
)
from noma_isac.conic.program import coords_from_hermitian, hermitian_from_coords
from noma_isac.conic.textio import ParseError, dumps, loads


def trace_program(diag=(1.0, 2.0)):
    p = ConicProgram()
    W = p.add_hermitian("W", len(diag))
    for a, d in enumerate(diag):
        p.add_eq(p.diag_entry(W, a) - d, f"diag{a}")
    p.maximize(p.trace(W))
    return p, W


def log_program():
    p = ConicProgram()
    g = p.scalar(p.add_scalar("g"))
    x = p.scalar(p.add_scalar("x"))
    p.add_ge(x, "x_lo")
    p.add_ge(3.0 - x, "x_hi")
    p.add_log(g, 1.0 + x, 2.0, "rate")
    p.maximize(g)
    return p


def soc_program(cap=None):
    p = ConicProgram()
    x, y, t = (p.scalar(p.add_scalar(n)) for n in "xyt")
    p.add_soc([x, y], t, "cone")
    if cap is not None:
        p.add_ge(cap - t, "cap")
    p.maximize(t)
    return p


def test_trace_with_fixed_diagonal():
    p, W = trace_program()
    sol = solve_conic(p)
    assert sol.status is SolveStatus.OPTIMAL
    assert sol.objective == pytest.approx(3.0, abs=1e-7)
    np.testing.assert_allclose(np.diag(sol.values["W"]).real, [1.0, 2.0], atol=1e-7)
    assert np.linalg.eigvalsh(sol.values["W"]).min() >= -1e-7


def test_log_constraint():
    sol = solve_conic(log_program())
    assert sol.ok
    assert sol.objective == pytest.approx(2.0, abs=1e-6)
    assert sol.values["x"] == pytest.approx(3.0, abs=1e-5)


def test_soc_unbounded_then_capped():
    assert solve_conic(soc_program()).status is SolveStatus.UNBOUNDED
    sol = solve_conic(soc_program(cap=5.0))
    assert sol.ok and sol.objective == pytest.approx(5.0, abs=1e-6)


def test_infeasible_detected():
    p = ConicProgram()
    x = p.scalar(p.add_scalar("x"))
    p.add_ge(x - 2.0, "lo")
    p.add_ge(1.0 - x, "hi")
    p.maximize(x)
    assert solve_conic(p).status is SolveStatus.INFEASIBLE


def test_census_counts():
    p = soc_program(cap=1.0)
    assert p.census() == {"eq": 0, "ge": 1, "soc": 1, "log": 0}


@pytest.mark.parametrize("build", [lambda: trace_program()[0], log_program, lambda: soc_program(4.0)])
def test_text_round_trip(build):
    p = build()
    text = dumps(p)
    q = loads(text)
    assert dumps(q) == text
    assert solve_conic(q).objective == pytest.approx(solve_conic(p).objective, abs=1e-8)


def test_parse_error_reports_line():
    text = dumps(log_program()).replace("maximize", "minimise")
    with pytest.raises(ParseError, match="line"):
        loads(text)


@given(st.floats(0.01, 100.0))
@settings(max_examples=10, deadline=None)
def test_objective_scaling(c):
    base = log_program()
    scaled = log_program()
    scaled.maximize(base.objective * c)
    s0, s1 = solve_conic(base), solve_conic(scaled)
    assert s1.objective == pytest.approx(c * s0.objective, rel=1e-6)
    assert s1.values["x"] == pytest.approx(s0.values["x"], abs=1e-4)


def test_hermitian_coordinates_round_trip():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    H = A + A.conj().T
    np.testing.assert_allclose(hermitian_from_coords(coords_from_hermitian(H), 4), H)


def test_trace_inner_matches_numeric():
    rng = np.random.default_rng(2)
    p = ConicProgram()
    W = p.add_hermitian("W", 3)
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    C = A + A.conj().T
    B = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    X = B @ B.conj().T
    x = np.zeros(p.n_coords)
    x[W.offset:W.offset + W.ncoords] = coords_from_hermitian(X)
    assert p.trace_inner(W, C).evaluate(x) == pytest.approx(np.trace(C @ X).real)


def test_cvxpy_backend_agrees():
    rng = np.random.default_rng(4)
    p = ConicProgram()
    W = p.add_hermitian("W", 3)
    g = p.scalar(p.add_scalar("g"))
    h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    a = np.exp(1j * np.pi * np.arange(3) * math.sin(0.5))
    for i in range(3):
        p.add_eq(p.diag_entry(W, i) - 1.0)
    p.add_log(g, 1.0 + p.trace_inner(W, np.outer(h, h.conj())), 2.0, "rate")
    re, im = p.trace_inner_complex(W, np.outer(a, a.conj()))
    p.add_soc([re, im], Affine.constant(2.0), "xcorr")
    p.maximize(g + 0.1 * p.trace_inner(W, np.outer(a, a.conj())))
    s1, s2 = solve_conic(p, backend="clarabel"), solve_conic(p, backend="cvxpy")
    assert s1.ok and s2.ok
    assert s1.objective == pytest.approx(s2.objective, rel=1e-5)
