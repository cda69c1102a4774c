"""Backend-agnostic description of a convex conic program.

A program is built over two kinds of variables:

* complex Hermitian blocks ``W`` of side ``n``; each is stored as ``n*n`` real
  coordinates (``n`` diagonal entries, then the real and imaginary parts of
  every strictly-upper entry ``W[a, b] = u + 1j*v``, pairs ordered row-major);
* real scalars.

Every constraint is written in terms of :class:`Affine` expressions over the
global real coordinate vector ``x``. Supported constraint kinds are affine
equality (``expr == 0``), affine inequality (``expr >= 0``), second-order cone
(``||vec|| <= bound``) and logarithmic epigraph (``lhs <= log_base(arg)``).
The objective is always maximized.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class VarKind(str, enum.Enum):
    HERM = "herm"
    SCALAR = "scalar"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind
    size: int
    offset: int

    @property
    def ncoords(self) -> int:
        return self.size * self.size if self.kind is VarKind.HERM else 1

    def coord_names(self) -> list[str]:
        if self.kind is VarKind.SCALAR:
            return [self.name]
        n = self.size
        names = [f"{self.name}.d{a}" for a in range(n)]
        for a, b in upper_pairs(n):
            names += [f"{self.name}.re{a}_{b}", f"{self.name}.im{a}_{b}"]
        return names


def upper_pairs(n: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(n) for b in range(a + 1, n)]


class Affine:
    """Sparse affine function ``sum_i c_i x_i + const`` of the coordinate vector."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs: dict[int, float] | None = None, const: float = 0.0):
        self.coeffs = dict(coeffs) if coeffs else {}
        self.const = float(const)

    @classmethod
    def constant(cls, value: float) -> "Affine":
        return cls(None, value)

    def copy(self) -> "Affine":
        return Affine(self.coeffs, self.const)

    def _combine(self, other, sign: float) -> "Affine":
        out = self.copy()
        if isinstance(other, Affine):
            for i, c in other.coeffs.items():
                out.coeffs[i] = out.coeffs.get(i, 0.0) + sign * c
            out.const += sign * other.const
        else:
            out.const += sign * float(other)
        return out

    def __add__(self, other) -> "Affine":
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other) -> "Affine":
        return self._combine(other, -1.0)

    def __rsub__(self, other) -> "Affine":
        return (-self)._combine(other, 1.0)

    def __neg__(self) -> "Affine":
        return self * -1.0

    def __mul__(self, scalar: float) -> "Affine":
        s = float(scalar)
        return Affine({i: s * c for i, c in self.coeffs.items()}, s * self.const)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "Affine":
        return self * (1.0 / float(scalar))

    def is_constant(self) -> bool:
        return all(c == 0.0 for c in self.coeffs.values())

    def dense(self, n: int) -> np.ndarray:
        row = np.zeros(n)
        for i, c in self.coeffs.items():
            row[i] += c
        return row

    def evaluate(self, x: np.ndarray) -> float:
        return float(sum(c * x[i] for i, c in self.coeffs.items()) + self.const)

    def __repr__(self) -> str:
        return f"Affine({self.coeffs!r}, {self.const!r})"


class ConstraintKind(str, enum.Enum):
    EQ = "eq"
    GE = "ge"
    SOC = "soc"
    LOG = "log"


@dataclass
class Constraint:
    kind: ConstraintKind
    label: str
    exprs: list[Affine]
    base: float = math.e

    # EQ/GE: exprs = [expr]; SOC: exprs = [bound, v1, v2, ...];
    # LOG: exprs = [lhs, arg] meaning lhs <= log_base(arg).

    def violation(self, x: np.ndarray) -> float:
        vals = [e.evaluate(x) for e in self.exprs]
        if self.kind is ConstraintKind.EQ:
            return abs(vals[0])
        if self.kind is ConstraintKind.GE:
            return max(0.0, -vals[0])
        if self.kind is ConstraintKind.SOC:
            return max(0.0, float(np.linalg.norm(vals[1:])) - vals[0])
        lhs, arg = vals
        if arg <= 0:
            return math.inf
        return max(0.0, lhs - math.log(arg) / math.log(self.base))


@dataclass
class ConicProgram:
    variables: list[Variable] = field(default_factory=list)
    objective: Affine = field(default_factory=Affine)
    constraints: list[Constraint] = field(default_factory=list)

    @property
    def n_coords(self) -> int:
        if not self.variables:
            return 0
        last = self.variables[-1]
        return last.offset + last.ncoords

    def variable(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def _declare(self, name: str, kind: VarKind, size: int) -> Variable:
        if not name or any(ch.isspace() or ch in "*:|;.#" for ch in name):
            raise ValueError(f"invalid variable name {name!r}")
        if any(v.name == name for v in self.variables):
            raise ValueError(f"duplicate variable {name!r}")
        if size < 1:
            raise ValueError("variable size must be positive")
        var = Variable(name, kind, size, self.n_coords)
        self.variables.append(var)
        return var

    def add_hermitian(self, name: str, n: int) -> Variable:
        return self._declare(name, VarKind.HERM, n)

    def add_scalar(self, name: str) -> Variable:
        return self._declare(name, VarKind.SCALAR, 1)

    # -- expression helpers -------------------------------------------------

    def scalar(self, var: Variable) -> Affine:
        if var.kind is not VarKind.SCALAR:
            raise TypeError(f"{var.name} is not a scalar")
        return Affine({var.offset: 1.0})

    def trace_inner(self, var: Variable, C: np.ndarray) -> Affine:
        """Real affine expression for ``Tr(C W)`` with ``C`` Hermitian."""
        if var.kind is not VarKind.HERM:
            raise TypeError(f"{var.name} is not a Hermitian block")
        C = np.asarray(C, dtype=complex)
        n = var.size
        if C.shape != (n, n):
            raise ValueError(f"coefficient shape {C.shape} does not match block side {n}")
        coeffs: dict[int, float] = {}
        for a in range(n):
            if C[a, a].real != 0.0:
                coeffs[var.offset + a] = float(C[a, a].real)
        for p, (a, b) in enumerate(upper_pairs(n)):
            # C_ab conj(W_ab) + conj(C_ab) W_ab = 2 (Re C_ab u + Im C_ab v)
            re, im = 2.0 * C[a, b].real, 2.0 * C[a, b].imag
            if re != 0.0:
                coeffs[var.offset + n + 2 * p] = float(re)
            if im != 0.0:
                coeffs[var.offset + n + 2 * p + 1] = float(im)
        return Affine(coeffs)

    def trace_inner_complex(self, var: Variable, C: np.ndarray) -> tuple[Affine, Affine]:
        """Real and imaginary parts of ``Tr(C W)`` for arbitrary square ``C``."""
        C = np.asarray(C, dtype=complex)
        herm = 0.5 * (C + C.conj().T)
        skew = (C - C.conj().T) / 2j
        return self.trace_inner(var, herm), self.trace_inner(var, skew)

    def diag_entry(self, var: Variable, a: int) -> Affine:
        return Affine({var.offset + a: 1.0})

    def trace(self, var: Variable) -> Affine:
        return Affine({var.offset + a: 1.0 for a in range(var.size)})

    # -- constraints ----------------------------------------------------------

    def maximize(self, expr: Affine) -> None:
        self.objective = expr.copy()

    def add_eq(self, expr: Affine, label: str = "eq") -> None:
        self.constraints.append(Constraint(ConstraintKind.EQ, label, [expr]))

    def add_ge(self, expr: Affine, label: str = "ge") -> None:
        self.constraints.append(Constraint(ConstraintKind.GE, label, [expr]))

    def add_soc(self, vec: Sequence[Affine], bound: Affine | float, label: str = "soc") -> None:
        if not isinstance(bound, Affine):
            bound = Affine.constant(bound)
        self.constraints.append(Constraint(ConstraintKind.SOC, label, [bound, *vec]))

    def add_log(self, lhs: Affine, arg: Affine, base: float = math.e, label: str = "log") -> None:
        if base <= 0 or base == 1:
            raise ValueError("log base must be positive and different from 1")
        self.constraints.append(Constraint(ConstraintKind.LOG, label, [lhs, arg], float(base)))

    def census(self) -> dict[str, int]:
        counts = {k.value: 0 for k in ConstraintKind}
        for c in self.constraints:
            counts[c.kind.value] += 1
        return counts

    # -- evaluation -------------------------------------------------------------

    def validate(self) -> None:
        n = self.n_coords
        for expr in [self.objective] + [e for c in self.constraints for e in c.exprs]:
            for i in expr.coeffs:
                if not 0 <= i < n:
                    raise ValueError(f"expression references undeclared coordinate {i}")

    def value(self, var: Variable, x: np.ndarray):
        seg = np.asarray(x[var.offset:var.offset + var.ncoords], dtype=float)
        if var.kind is VarKind.SCALAR:
            return float(seg[0])
        return hermitian_from_coords(seg, var.size)

    def values(self, x: np.ndarray) -> dict:
        return {v.name: self.value(v, x) for v in self.variables}

    def max_violation(self, x: np.ndarray) -> float:
        worst = 0.0
        for c in self.constraints:
            worst = max(worst, c.violation(x))
        for v in self.variables:
            if v.kind is VarKind.HERM:
                lam = np.linalg.eigvalsh(self.value(v, x))
                worst = max(worst, float(-lam[0]))
        return worst


def hermitian_from_coords(coords: Sequence[float], n: int) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    W = np.diag(coords[:n]).astype(complex)
    for p, (a, b) in enumerate(upper_pairs(n)):
        W[a, b] = coords[n + 2 * p] + 1j * coords[n + 2 * p + 1]
        W[b, a] = np.conj(W[a, b])
    return W


def coords_from_hermitian(W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=complex)
    n = W.shape[0]
    out = list(W.diagonal().real)
    for a, b in upper_pairs(n):
        out += [W[a, b].real, W[a, b].imag]
    return np.array(out)


def real_embedding_rows(n: int) -> list[dict[int, float]]:
    """Local-coordinate rows of the ``2n x 2n`` real embedding ``[[A, -B], [B, A]]``.

    One row per upper-triangle entry of the embedding in column-major order,
    without any svec scaling. ``A`` and ``B`` are the real and imaginary parts
    of the Hermitian block; the embedding is PSD iff the block is, and each
    eigenvalue of the block appears twice in it.
    """
    pair_index = {pq: p for p, pq in enumerate(upper_pairs(n))}

    def re_entry(a: int, b: int) -> dict[int, float]:
        if a == b:
            return {a: 1.0}
        lo, hi = min(a, b), max(a, b)
        return {n + 2 * pair_index[lo, hi]: 1.0}

    def im_entry(a: int, b: int) -> dict[int, float]:
        if a == b:
            return {}
        if a < b:
            return {n + 2 * pair_index[a, b] + 1: 1.0}
        return {n + 2 * pair_index[b, a] + 1: -1.0}

    rows = []
    for c in range(2 * n):
        for r in range(c + 1):
            if r < n and c < n:
                rows.append(re_entry(r, c))
            elif r >= n and c >= n:
                rows.append(re_entry(r - n, c - n))
            elif r < n:
                rows.append({i: -v for i, v in im_entry(r, c - n).items()})
            else:
                rows.append(im_entry(r - n, c))
    return rows


def sum_affine(terms: Iterable[Affine]) -> Affine:
    out = Affine()
    for t in terms:
        out = out + t
    return out
