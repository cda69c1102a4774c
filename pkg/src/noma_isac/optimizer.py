"""Double-layer penalty-based SCA beamforming design.

Variables are the per-user covariances ``W_k`` (Hermitian PSD, mW) and the
rate slacks ``gamma_k``. Each inner iteration solves a convex subproblem in
which

* interference log-terms are replaced by their tangent planes at ``W_n``,
* the rank-one requirement is a penalty ``(1/eta) sum_k (Tr W_k - ||W_k||_2)``
  whose concave part ``-||W_k||_2`` is replaced by its tangent at ``W_n``.

The outer loop shrinks ``eta`` until the penalty residual is below tolerance.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import metrics
from .conic import Affine, ConicProgram, SolveStatus, Variable, solve_conic, sum_affine
from .scene import ChannelSet, ScenarioConfig, generate_channels, steering_vector
from .surrogates import (
    LN2,
    linearized_log_bound,
    noma_interferers,
    penalty_residual,
    received_power,
    sdma_interferers,
    spectral_norm_surrogate,
)

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    NOMA = "noma"
    SDMA = "sdma"
    COMM_ONLY = "comm-only"
    SENSE_ONLY = "sense-only"


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"
    INFEASIBLE = "Infeasible"
    BACKEND_FAILURE = "BackendFailure"


class InfeasibleError(RuntimeError):
    pass


class BackendFailure(RuntimeError):
    pass


class RankDeficiencyError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    eta0: float = 1e5
    eta_shrink: float = 0.2
    inner_tol: float = 1e-2
    penalty_tol: float = 1e-4
    max_inner_iters: int = 50
    max_outer_iters: int = 30
    subproblem_tol: float = 1e-8
    rank1_extract_tol: float = 1e-4
    backend: str = "clarabel"
    guard_band: bool = True

    def __post_init__(self):
        if not 0 < self.eta_shrink < 1:
            raise ValueError("eta_shrink must lie in (0, 1)")
        for name in ("eta0", "inner_tol", "penalty_tol", "subproblem_tol", "rank1_extract_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_inner_iters < 1 or self.max_outer_iters < 1:
            raise ValueError("iteration limits must be positive")


@dataclass(frozen=True)
class Scene:
    config: ScenarioConfig
    channels: ChannelSet

    @classmethod
    def generate(cls, config: ScenarioConfig, seed) -> "Scene":
        return cls(config, generate_channels(config, seed))

    @property
    def K(self) -> int:
        return self.config.n_users

    @property
    def N(self) -> int:
        return self.config.n_antennas

    def steering(self) -> np.ndarray:
        return np.stack([steering_vector(t, self.config.geometry) for t in self.config.target_angles_deg])


@dataclass
class IterationState:
    W_n: np.ndarray
    eta: float
    gamma: np.ndarray | None = None
    objective_trace: list[float] = field(default_factory=list)
    penalty_trace: list[float] = field(default_factory=list)
    records: list[dict] = field(default_factory=list)
    inner_count: int = 0
    outer_count: int = 0
    inner_limit_hits: int = 0


@dataclass
class SolveReport:
    mode: Mode
    status: Status
    beamformers: np.ndarray | None
    covariances: np.ndarray | None
    rates: np.ndarray | None
    general_rank_rates: np.ndarray | None
    radar: metrics.RadarMetrics | None
    penalty_residual: float
    objective: float
    records: list[dict] = field(default_factory=list)
    outer_iters: int = 0
    inner_iters_total: int = 0
    message: str = ""

    @property
    def throughput(self) -> float:
        return float(np.sum(self.rates)) if self.rates is not None else math.nan

    @property
    def objective_trace(self) -> list[float]:
        return [r["objective"] for r in self.records]

    @property
    def penalty_trace(self) -> list[float]:
        return [r["penalty"] for r in self.records]


# -- subproblem assembly ---------------------------------------------------------


def _rate_mode(mode: Mode, comm_access: Mode) -> Mode | None:
    if mode is Mode.SENSE_ONLY:
        return None
    if mode is Mode.COMM_ONLY:
        return comm_access
    return mode


def _weights(config: ScenarioConfig, mode: Mode) -> tuple[float, float]:
    rc, rr = config.weight_comm, config.weight_radar
    if mode is Mode.COMM_ONLY:
        return (rc if rc > 0 else 1.0), 0.0
    if mode is Mode.SENSE_ONLY:
        return 0.0, (rr if rr > 0 else 1.0)
    return rc, rr


@dataclass
class Subproblem:
    program: ConicProgram
    W: list[Variable]
    gamma: list[Variable]
    extra: dict = field(default_factory=dict)

    def covariances(self, x: np.ndarray) -> np.ndarray:
        covs = np.stack([self.program.value(v, x) for v in self.W])
        return 0.5 * (covs + covs.conj().transpose(0, 2, 1))

    def gammas(self, x: np.ndarray) -> np.ndarray:
        return np.array([self.program.value(g, x) for g in self.gamma])


def _declare(scene: Scene, with_gamma: bool) -> tuple[ConicProgram, list[Variable], list[Variable]]:
    p = ConicProgram()
    W = [p.add_hermitian(f"W{k + 1}", scene.N) for k in range(scene.K)]
    gamma = [p.add_scalar(f"g{k + 1}") for k in range(scene.K)] if with_gamma else []
    return p, W, gamma


def _add_radar_constraints(p: ConicProgram, W: list[Variable], scene: Scene, mode: Mode,
                           guard: float = 0.0) -> None:
    """Per-antenna power, pairwise power-difference and cross-correlation constraints.

    ``guard`` tightens the two sensing caps so that dropping a PSD remainder of
    trace ``guard / N`` (the rank-one extraction) cannot push them over.
    """
    cfg = scene.config
    N = scene.N
    per_antenna = cfg.total_power_mw / N
    for a in range(N):
        p.add_eq(sum_affine(p.diag_entry(Wk, a) for Wk in W) - per_antenna, f"perantenna_{a}")
    if mode is Mode.COMM_ONLY:
        return
    A = scene.steering()
    M = len(A)
    if M < 2:
        return
    power = [sum_affine(p.trace_inner(Wk, np.outer(A[m], A[m].conj())) for Wk in W) for m in range(M)]
    for m in range(M):
        for q in range(m + 1, M):
            cap = cfg.power_diff_cap - guard
            p.add_ge(cap - (power[m] - power[q]), f"pdiff_{m}_{q}")
            p.add_ge(cap + (power[m] - power[q]), f"pdiff_{q}_{m}")
    scale = math.sqrt(2.0 / (M * M - M))
    parts: list[Affine] = []
    for m in range(M):
        for q in range(m + 1, M):
            # a_m^H R a_q = Tr(R a_q a_m^H)
            re_im = [p.trace_inner_complex(Wk, np.outer(A[q], A[m].conj())) for Wk in W]
            parts.append(sum_affine(r for r, _ in re_im) * scale)
            parts.append(sum_affine(i for _, i in re_im) * scale)
    p.add_soc(parts, math.sqrt(cfg.crosscorr_cap) - guard, "crosscorr")


def _sensing_sum(p: ConicProgram, W: list[Variable], scene: Scene) -> Affine:
    A = scene.steering()
    S = sum(np.outer(a, a.conj()) for a in A)
    return sum_affine(p.trace_inner(Wk, S) for Wk in W)


def build_subproblem(scene: Scene, W_n: np.ndarray, eta: float, mode: Mode = Mode.NOMA,
                     comm_access: Mode = Mode.NOMA, guard: float = 0.0) -> Subproblem:
    """Convex subproblem linearized at ``W_n`` with penalty weight ``1/eta``."""
    rate_mode = _rate_mode(mode, comm_access)
    p, W, gamma = _declare(scene, rate_mode is not None)
    rc, rr = _weights(scene.config, mode)
    ch = scene.channels
    K = scene.K

    objective = Affine()
    if rate_mode is not None:
        objective = objective + rc * sum_affine(p.scalar(g) for g in gamma)
    if mode is not Mode.COMM_ONLY and rr > 0:
        objective = objective + rr * _sensing_sum(p, W, scene)
    penalty = Affine()
    for k in range(K):
        surrogate = spectral_norm_surrogate(W_n[k])
        penalty = penalty + p.trace(W[k]) + p.trace_inner(W[k], surrogate.coeffs[0]) + surrogate.const
    p.maximize(objective - penalty * (1.0 / eta))

    _add_radar_constraints(p, W, scene, mode, guard)

    if rate_mode is Mode.NOMA:
        for k in range(K):
            g = p.scalar(gamma[k])
            if k == K - 1:
                arg = received_power(ch, k, [k]).to_affine(p, W)
                p.add_log(g, arg, 2.0, f"rate_{k + 1}_{k + 1}")
                continue
            for j in range(k, K):
                arg = received_power(ch, j, range(k, K)).to_affine(p, W)
                fhat = linearized_log_bound(j, noma_interferers(k, K), W_n, ch).to_affine(p, W)
                p.add_log(g - fhat, arg, 2.0, f"rate_{k + 1}_{j + 1}")
    elif rate_mode is Mode.SDMA:
        for k in range(K):
            g = p.scalar(gamma[k])
            arg = received_power(ch, k, range(K)).to_affine(p, W)
            fhat = linearized_log_bound(k, sdma_interferers(k, K), W_n, ch).to_affine(p, W)
            p.add_log(g - fhat, arg, 2.0, f"rate_{k + 1}")
    if rate_mode is not None:
        for k in range(K):
            p.add_ge(p.scalar(gamma[k]) - scene.config.min_rate_bpshz[k], f"rmin_{k + 1}")
    return Subproblem(p, W, gamma)


# -- exact evaluation at general rank ----------------------------------------------


def general_rank_rates(scene: Scene, covs: np.ndarray, rate_mode: Mode) -> np.ndarray:
    G = metrics.covariance_gains(covs, scene.channels)
    if rate_mode is Mode.SDMA:
        return metrics.sdma_rates_from_gains(G, scene.channels.noise_power)
    return metrics.noma_rates_from_gains(G, scene.channels.noise_power)


def penalized_objective(scene: Scene, covs: np.ndarray, eta: float, mode: Mode,
                        comm_access: Mode = Mode.NOMA) -> float:
    """True (non-linearized) penalized objective at general rank."""
    rate_mode = _rate_mode(mode, comm_access)
    rc, rr = _weights(scene.config, mode)
    value = 0.0
    if rate_mode is not None and rc > 0:
        value += rc * float(np.sum(general_rank_rates(scene, covs, rate_mode)))
    if mode is not Mode.COMM_ONLY and rr > 0:
        R = covs.sum(axis=0)
        value += rr * float(np.sum(metrics.beampattern(R, scene.config.target_angles_deg, scene.config.geometry)))
    return value - penalty_residual(covs) / eta


def constraint_violations(scene: Scene, covs: np.ndarray, mode: Mode = Mode.NOMA,
                          comm_access: Mode = Mode.NOMA) -> dict[str, float]:
    """Worst violation per constraint family at a general-rank point (0 when satisfied)."""
    cfg = scene.config
    R = covs.sum(axis=0)
    out = {
        "psd": max(0.0, -min(float(np.linalg.eigvalsh(W)[0]) for W in covs)),
        "per_antenna": float(np.max(np.abs(np.real(np.diag(R)) - cfg.total_power_mw / scene.N))),
    }
    if mode is not Mode.COMM_ONLY:
        P = metrics.beampattern(R, cfg.target_angles_deg, cfg.geometry)
        out["power_diff"] = max(0.0, float(P.max() - P.min()) - cfg.power_diff_cap)
        out["crosscorr"] = max(0.0, metrics.mean_sq_crosscorr(R, cfg.target_angles_deg, cfg.geometry)
                               - cfg.crosscorr_cap)
    rate_mode = _rate_mode(mode, comm_access)
    if rate_mode is not None:
        rates = general_rank_rates(scene, covs, rate_mode)
        out["min_rate"] = max(0.0, float(np.max(np.asarray(cfg.min_rate_bpshz) - rates)))
    return out


# -- initialization ---------------------------------------------------------------


def _rate_ceiling(scene: Scene, k: int) -> float:
    h = scene.channels.channels[k]
    return math.log2(1.0 + float(np.vdot(h, h).real) * scene.config.total_power_mw / scene.channels.noise_power)


def initialize_feasible(scene: Scene, mode: Mode = Mode.NOMA, comm_access: Mode = Mode.NOMA,
                        tol: float = 1e-8, backend: str = "clarabel", guard: float = 0.0) -> np.ndarray:
    """Feasible general-rank starting covariances.

    Solves the convex program that maximizes the smallest normalized SINR
    margin subject to the per-antenna, sensing and minimum-rate constraints
    (each rate requirement is affine once written in SINR form).
    """
    cfg = scene.config
    ch = scene.channels
    K = scene.K
    rate_mode = _rate_mode(mode, comm_access)
    if rate_mode is not None:
        for k in range(K):
            if cfg.min_rate_bpshz[k] > _rate_ceiling(scene, k):
                raise InfeasibleError(
                    f"user {k + 1}: minimum rate {cfg.min_rate_bpshz[k]} exceeds the single-user "
                    f"ceiling {_rate_ceiling(scene, k):.3f} bit/s/Hz")

    p, W, _ = _declare(scene, False)
    margin = p.add_scalar("s")
    s = p.scalar(margin)
    _add_radar_constraints(p, W, scene, mode, guard)

    rows: list[tuple[str, Affine, float]] = []
    if rate_mode is not None:
        tau = [2.0 ** r - 1.0 for r in cfg.min_rate_bpshz]
        for k in range(K):
            if rate_mode is Mode.NOMA:
                pairs = [(j, noma_interferers(k, K)) for j in range(k, K)] if k < K - 1 else [(k, [])]
            else:
                pairs = [(k, sdma_interferers(k, K))]
            for j, interf in pairs:
                signal = received_power(ch, j, [k], 0.0).to_affine(p, W)
                noise_plus = received_power(ch, j, interf).to_affine(p, W)
                scale = ch.noise_power + float(np.vdot(ch.channels[j], ch.channels[j]).real) * cfg.total_power_mw
                rows.append((f"sinr_{k + 1}_{j + 1}", (signal - noise_plus * tau[k]) / scale, scale))
    for label, expr, _ in rows:
        p.add_ge(expr - s, label)
    if rows:
        p.add_ge(1.0 - s, "margin_cap")
        p.maximize(s)
    else:
        p.add_eq(s, "margin_unused")
        p.maximize(Affine())

    sol = solve_conic(p, tol, backend)
    if sol.status is SolveStatus.INFEASIBLE:
        raise InfeasibleError("no covariance satisfies the sensing and rate constraints")
    if not sol.ok:
        raise BackendFailure(f"initialization solve failed: {sol.status.value} ({sol.message})")
    if rows and sol.values["s"] < -10 * tol:
        raise InfeasibleError(f"minimum-rate requirements unattainable (best margin {sol.values['s']:.3e})")
    covs = np.stack([sol.values[v.name] for v in W])
    return 0.5 * (covs + covs.conj().transpose(0, 2, 1))


def guard_band(scene: Scene, config: SolverConfig) -> float:
    """Cap tightening that covers the extraction error once the penalty is below tolerance."""
    if not config.guard_band:
        return 0.0
    cfg = scene.config
    return min(scene.N * config.penalty_tol, 0.01 * cfg.power_diff_cap, 0.01 * math.sqrt(cfg.crosscorr_cap))


# -- iterations ----------------------------------------------------------------------


def _solve_sub(sub: Subproblem, config: SolverConfig):
    sol = solve_conic(sub.program, config.subproblem_tol, config.backend)
    if not sol.ok:
        # one retry at a looser accuracy before giving up
        retry = solve_conic(sub.program, config.subproblem_tol * 100, config.backend)
        if retry.ok:
            log.debug("subproblem needed loosened tolerance (%s)", sol.message)
            return retry
        raise BackendFailure(f"subproblem solve failed: {sol.status.value} ({sol.message})")
    return sol


def inner_loop(state: IterationState, scene: Scene, config: SolverConfig, mode: Mode = Mode.NOMA,
               comm_access: Mode = Mode.NOMA) -> IterationState:
    obj_prev = penalized_objective(scene, state.W_n, state.eta, mode, comm_access)
    for it in range(1, config.max_inner_iters + 1):
        sub = build_subproblem(scene, state.W_n, state.eta, mode, comm_access, guard_band(scene, config))
        sol = _solve_sub(sub, config)
        state.W_n = sub.covariances(sol.x)
        state.gamma = sub.gammas(sol.x) if sub.gamma else None
        obj = penalized_objective(scene, state.W_n, state.eta, mode, comm_access)
        pen = penalty_residual(state.W_n)
        state.inner_count += 1
        state.objective_trace.append(obj)
        state.penalty_trace.append(pen)
        state.records.append({
            "outer": state.outer_count, "inner": it, "eta": state.eta,
            "objective": obj, "penalty": pen, "subproblem_objective": sol.objective,
        })
        change = abs(obj - obj_prev) / max(abs(obj_prev), 1e-9)
        obj_prev = obj
        if change < config.inner_tol:
            break
    else:
        state.inner_limit_hits += 1
    return state


def extract_beamformers(covs: np.ndarray, tol: float = 1e-4) -> np.ndarray:
    """Rank-one factors ``w_k = sqrt(lambda_max) v_max`` of each covariance."""
    covs = np.asarray(covs)
    beams = np.zeros(covs.shape[:2], dtype=complex)
    for k, W in enumerate(covs):
        W = 0.5 * (W + W.conj().T)
        s = np.linalg.svd(W, compute_uv=False)
        if s[0] == 0.0:
            continue
        ratio = (s.sum() - s[0]) / s[0]
        if ratio > tol:
            raise RankDeficiencyError(f"covariance {k + 1} is not rank one (residual ratio {ratio:.3e})")
        lam, v = np.linalg.eigh(W)
        w = math.sqrt(max(lam[-1], 0.0)) * v[:, -1]
        nz = np.flatnonzero(np.abs(w) > 1e-12 * max(1.0, np.abs(w).max()))
        if nz.size:
            w = w * np.exp(-1j * np.angle(w[nz[0]]))
        beams[k] = w
    return beams


def _report(scene: Scene, mode: Mode, comm_access: Mode, status: Status, covs: np.ndarray,
            state: IterationState, config: SolverConfig, message: str = "") -> SolveReport:
    rate_mode = _rate_mode(mode, comm_access)
    try:
        beams = extract_beamformers(covs, config.rank1_extract_tol)
    except RankDeficiencyError as exc:
        if status is Status.CONVERGED:
            status, message = Status.MAX_ITERS, str(exc)
        beams = extract_beamformers(covs, math.inf)
    cfg = scene.config
    R = metrics.transmit_covariance(beams)
    radar = metrics.radar_metrics(R, cfg.target_angles_deg, cfg.geometry)
    eval_mode = rate_mode or Mode.NOMA
    if eval_mode is Mode.SDMA:
        rates = metrics.sdma_rates(beams, scene.channels, scene.channels.noise_power)
    else:
        rates = metrics.noma_rates(beams, scene.channels, scene.channels.noise_power)
    gr_rates = general_rank_rates(scene, covs, eval_mode)
    rc, rr = _weights(cfg, mode)
    objective = metrics.weighted_objective(rates if rate_mode else np.zeros(scene.K), radar, rc,
                                           rr if mode is not Mode.COMM_ONLY else 0.0)
    return SolveReport(
        mode=mode, status=status, beamformers=beams, covariances=covs, rates=rates,
        general_rank_rates=gr_rates, radar=radar, penalty_residual=penalty_residual(covs),
        objective=objective, records=state.records, outer_iters=state.outer_count,
        inner_iters_total=state.inner_count, message=message,
    )


def solve(scene: Scene, config: SolverConfig = SolverConfig(), mode: Mode = Mode.NOMA,
          comm_access: Mode = Mode.NOMA) -> SolveReport:
    """Run the double-layer algorithm. Never raises for solver outcomes; see ``status``."""
    mode = Mode(mode)
    comm_access = Mode(comm_access)
    if comm_access not in (Mode.NOMA, Mode.SDMA):
        raise ValueError("comm_access must be noma or sdma")
    empty = IterationState(W_n=np.zeros((scene.K, scene.N, scene.N), complex), eta=config.eta0)
    try:
        W0 = initialize_feasible(scene, mode, comm_access, config.subproblem_tol, config.backend,
                                 guard_band(scene, config))
    except InfeasibleError as exc:
        return _failed(mode, Status.INFEASIBLE, empty, str(exc))
    except BackendFailure as exc:
        return _failed(mode, Status.BACKEND_FAILURE, empty, str(exc))

    state = IterationState(W_n=W0, eta=config.eta0)
    status = Status.MAX_ITERS
    t0 = time.perf_counter()
    try:
        for outer in range(1, config.max_outer_iters + 1):
            state.outer_count = outer
            inner_loop(state, scene, config, mode, comm_access)
            residual = penalty_residual(state.W_n)
            log.debug("outer %d eta=%.3g penalty=%.3e obj=%.6g", outer, state.eta, residual,
                      state.objective_trace[-1])
            if residual <= config.penalty_tol:
                status = Status.CONVERGED
                break
            state.eta *= config.eta_shrink
    except BackendFailure as exc:
        report = _report(scene, mode, comm_access, Status.BACKEND_FAILURE, state.W_n, state, config, str(exc))
        return report
    log.debug("solve finished in %.2fs with status %s", time.perf_counter() - t0, status.value)
    return _report(scene, mode, comm_access, status, state.W_n, state, config)


def _failed(mode: Mode, status: Status, state: IterationState, message: str) -> SolveReport:
    return SolveReport(mode=mode, status=status, beamformers=None, covariances=None, rates=None,
                       general_rank_rates=None, radar=None, penalty_residual=math.nan,
                       objective=math.nan, records=state.records, message=message)
