"""Tangent surrogates used by the penalty-based SCA iterations.

Each surrogate is a :class:`LinearForm`: an affine function
``const + sum_i Tr(C_i W_i)`` of the covariance set, which can be evaluated on
numeric covariances or emitted into a :class:`~noma_isac.conic.ConicProgram`.
User indices are 0-based in SIC order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .conic import Affine, ConicProgram, Variable, sum_affine
from .scene import ChannelSet

LN2 = math.log(2.0)


@dataclass
class LinearForm:
    coeffs: dict[int, np.ndarray] = field(default_factory=dict)
    const: float = 0.0

    def __call__(self, covs: np.ndarray) -> float:
        total = self.const
        for i, C in self.coeffs.items():
            total += float(np.real(np.trace(C @ covs[i])))
        return total

    def __add__(self, other: "LinearForm") -> "LinearForm":
        out = LinearForm({i: C.copy() for i, C in self.coeffs.items()}, self.const + other.const)
        for i, C in other.coeffs.items():
            out.coeffs[i] = out.coeffs[i] + C if i in out.coeffs else C.copy()
        return out

    def scaled(self, s: float) -> "LinearForm":
        return LinearForm({i: s * C for i, C in self.coeffs.items()}, s * self.const)

    def to_affine(self, program: ConicProgram, W: Sequence[Variable]) -> Affine:
        return sum_affine(program.trace_inner(W[i], C) for i, C in self.coeffs.items()) + self.const


def received_power(channels: ChannelSet, j: int, users: Iterable[int], noise: float | None = None) -> LinearForm:
    """``noise + sum_{i in users} Tr(H_j W_i)``."""
    Hj = channels.gram(j)
    return LinearForm({i: Hj for i in users}, channels.noise_power if noise is None else noise)


def noma_interferers(k: int, K: int) -> list[int]:
    return list(range(k + 1, K))


def sdma_interferers(k: int, K: int) -> list[int]:
    return [i for i in range(K) if i != k]


def interference_log(j: int, interferers: Sequence[int], covs: np.ndarray, channels: ChannelSet) -> float:
    """Exact concave-negated term ``-log2(noise + sum_i Tr(H_j W_i))``."""
    return -math.log2(received_power(channels, j, interferers)(covs))


def linearized_log_bound(j: int, interferers: Sequence[int], covs_n: np.ndarray, channels: ChannelSet) -> LinearForm:
    """First-order expansion of ``-log2(noise + sum_i Tr(H_j W_i))`` at ``covs_n``.

    The negated log is convex, so its tangent plane is a global under-estimator.
    """
    base = received_power(channels, j, interferers)
    denom = base(covs_n)
    slope = -1.0 / (denom * LN2)
    # -log2(D_n) - (D(W) - D_n)/(D_n ln2)
    form = LinearForm({i: slope * C for i, C in base.coeffs.items()}, 0.0)
    form.const = -math.log2(denom) + slope * (base.const - denom)
    return form


def linearized_interference_bound(j: int, k: int, covs_n: np.ndarray, channels: ChannelSet) -> LinearForm:
    """NOMA interference term ``F_{j,k}`` linearized at ``covs_n`` (needs ``j >= k``)."""
    if j < k:
        raise ValueError("need j >= k")
    return linearized_log_bound(j, noma_interferers(k, channels.n_users), covs_n, channels)


@dataclass
class RateSurrogate:
    """Concave minorant ``log2(arg(W)) + offset(W)`` of a pair rate."""

    arg: LinearForm
    offset: LinearForm

    def __call__(self, covs: np.ndarray) -> float:
        return math.log2(self.arg(covs)) + self.offset(covs)


def surrogate_rate(j: int, k: int, covs_n: np.ndarray, channels: ChannelSet) -> RateSurrogate:
    """Lower bound of ``R_{k->j}`` tight at ``covs_n``."""
    K = channels.n_users
    if j < k:
        raise ValueError("need j >= k")
    arg = received_power(channels, j, range(k, K))
    return RateSurrogate(arg, linearized_interference_bound(j, k, covs_n, channels))


def sdma_surrogate_rate(k: int, covs_n: np.ndarray, channels: ChannelSet) -> RateSurrogate:
    K = channels.n_users
    arg = received_power(channels, k, range(K))
    return RateSurrogate(arg, linearized_log_bound(k, sdma_interferers(k, K), covs_n, channels))


def exact_pair_rate(j: int, k: int, covs: np.ndarray, channels: ChannelSet) -> float:
    """General-rank ``R_{k->j}`` in difference-of-logs form."""
    K = channels.n_users
    return math.log2(received_power(channels, j, range(k, K))(covs)) + interference_log(
        j, noma_interferers(k, K), covs, channels)


def exact_sdma_rate(k: int, covs: np.ndarray, channels: ChannelSet) -> float:
    K = channels.n_users
    return math.log2(received_power(channels, k, range(K))(covs)) + interference_log(
        k, sdma_interferers(k, K), covs, channels)


def principal_eigenvector(W: np.ndarray, rel_tol: float = 1e-10) -> tuple[float, np.ndarray]:
    """Largest eigenpair with a deterministic choice inside a repeated top eigenspace."""
    lam, V = np.linalg.eigh(W)
    top = lam[-1]
    cands = [V[:, i] for i in range(len(lam)) if lam[i] >= top - rel_tol * max(1.0, abs(top))]
    normed = []
    for v in cands:
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if nz.size:
            v = v * np.exp(-1j * np.angle(v[nz[0]]))
        normed.append(v)
    best = max(normed, key=lambda v: tuple(np.round(v.real, 12)))
    return float(top), best


def spectral_norm_surrogate(W_n: np.ndarray) -> LinearForm:
    """Upper bound of ``-||W||_2`` on a single block, tight at ``W_n``.

    Returned form acts on index 0, i.e. call it with ``W[None]``.
    """
    lam, v = principal_eigenvector(W_n)
    P = np.outer(v, v.conj())
    # -||W_n||_2 - Tr(P (W - W_n))
    const = -lam + float(np.real(np.trace(P @ W_n)))
    return LinearForm({0: -P}, const)


def penalty_residual(covs: np.ndarray) -> float:
    """``sum_k (||W_k||_* - ||W_k||_2)``; zero iff every block has rank <= 1."""
    total = 0.0
    for W in covs:
        s = np.linalg.svd(W, compute_uv=False)
        total += float(s.sum() - s[0])
    return total
