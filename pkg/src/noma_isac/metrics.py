"""Communication-rate and radar-sensing evaluators.

Users are indexed from 0 in SIC order (0 weakest, K-1 strongest). Beamformer
sets are ``(K, N)`` complex arrays, one row per user; covariance sets are
``(K, N, N)`` Hermitian arrays. Rates are in bit/s/Hz, and ``noise`` defaults
to 1 because stored channels are noise-normalized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .scene import ArrayGeometry, ChannelSet, steering_vector

HERMITIAN_TOL = 1e-9


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class RadarMetrics:
    beampattern_mw: tuple[float, ...]
    mean_sq_crosscorr: float
    sum_power_mw: float

    def as_dict(self) -> dict:
        return {
            "beampattern_mw": list(self.beampattern_mw),
            "mean_sq_crosscorr": self.mean_sq_crosscorr,
            "sum_power_mw": self.sum_power_mw,
        }


def _channel_array(channels) -> np.ndarray:
    return channels.channels if isinstance(channels, ChannelSet) else np.atleast_2d(np.asarray(channels))


def _check_hermitian(M: np.ndarray) -> None:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M), initial=0.0)))
    if np.max(np.abs(M - M.conj().T), initial=0.0) > HERMITIAN_TOL * scale:
        raise ValidationError("matrix is not Hermitian")


def transmit_covariance(beams: np.ndarray) -> np.ndarray:
    beams = np.atleast_2d(np.asarray(beams, dtype=complex))
    if beams.shape[0] == 0:
        raise ValidationError("empty beamformer set")
    return beams.T @ beams.conj()


def covariance_sum(covs: np.ndarray) -> np.ndarray:
    return np.asarray(covs).sum(axis=0)


def beampattern_power(cov: np.ndarray, angle_deg: float, geometry: ArrayGeometry) -> float:
    _check_hermitian(cov)
    a = steering_vector(angle_deg, geometry)
    return float(max(0.0, np.real(a.conj() @ cov @ a)))


def beampattern(cov: np.ndarray, angles_deg: Sequence[float], geometry: ArrayGeometry) -> np.ndarray:
    _check_hermitian(cov)
    A = np.stack([steering_vector(t, geometry) for t in angles_deg])
    return np.clip(np.real(np.einsum("mi,ij,mj->m", A.conj(), cov, A)), 0.0, None)


def mean_sq_crosscorr(cov: np.ndarray, target_angles_deg: Sequence[float], geometry: ArrayGeometry) -> float:
    _check_hermitian(cov)
    angles = list(target_angles_deg)
    if len(set(angles)) != len(angles):
        raise ValidationError("duplicate target angles")
    M = len(angles)
    if M < 2:
        return 0.0
    A = np.stack([steering_vector(t, geometry) for t in angles])
    C = A.conj() @ cov @ A.T
    iu = np.triu_indices(M, k=1)
    return float(2.0 / (M * M - M) * np.sum(np.abs(C[iu]) ** 2))


def radar_metrics(cov: np.ndarray, target_angles_deg: Sequence[float], geometry: ArrayGeometry) -> RadarMetrics:
    pattern = beampattern(cov, target_angles_deg, geometry)
    return RadarMetrics(
        beampattern_mw=tuple(float(p) for p in pattern),
        mean_sq_crosscorr=mean_sq_crosscorr(cov, target_angles_deg, geometry),
        sum_power_mw=float(pattern.sum()),
    )


# -- gains ----------------------------------------------------------------------


def beam_gains(beams: np.ndarray, channels) -> np.ndarray:
    """``G[j, i] = |h_j^H w_i|^2``."""
    H = _channel_array(channels)
    beams = np.atleast_2d(np.asarray(beams, dtype=complex))
    if beams.shape != H.shape:
        raise ValidationError(f"beams shape {beams.shape} does not match channels {H.shape}")
    return np.abs(H.conj() @ beams.T) ** 2


def covariance_gains(covs: np.ndarray, channels) -> np.ndarray:
    """``G[j, i] = Tr(h_j h_j^H W_i)`` for general-rank covariances."""
    H = _channel_array(channels)
    covs = np.asarray(covs)
    if covs.ndim != 3 or covs.shape[0] != H.shape[0] or covs.shape[1:] != (H.shape[1],) * 2:
        raise ValidationError(f"covariances shape {covs.shape} does not match channels {H.shape}")
    return np.real(np.einsum("jn,inm,jm->ji", H.conj(), covs, H))


def _pair_rate_from_gains(G: np.ndarray, k: int, j: int, noise: float) -> float:
    interference = G[j, k + 1:].sum()
    return float(np.log2(1.0 + max(G[j, k], 0.0) / (max(interference, 0.0) + noise)))


def noma_pair_rates_from_gains(G: np.ndarray, noise: float = 1.0) -> np.ndarray:
    """Matrix ``P[k, j] = R_{k->j}`` for ``j >= k`` (NaN below the diagonal)."""
    K = G.shape[0]
    P = np.full((K, K), np.nan)
    for k in range(K):
        for j in range(k, K):
            P[k, j] = _pair_rate_from_gains(G, k, j, noise)
    return P


def noma_rates_from_gains(G: np.ndarray, noise: float = 1.0) -> np.ndarray:
    K = G.shape[0]
    rates = np.empty(K)
    for k in range(K - 1):
        rates[k] = min(_pair_rate_from_gains(G, k, j, noise) for j in range(k, K))
    rates[K - 1] = np.log2(1.0 + max(G[K - 1, K - 1], 0.0) / noise)
    return rates


def sdma_rates_from_gains(G: np.ndarray, noise: float = 1.0) -> np.ndarray:
    K = G.shape[0]
    rates = np.empty(K)
    for k in range(K):
        interference = G[k].sum() - G[k, k]
        rates[k] = np.log2(1.0 + max(G[k, k], 0.0) / (max(interference, 0.0) + noise))
    return rates


def noma_pair_rate(beams: np.ndarray, channels, k: int, j: int, noise: float = 1.0) -> float:
    """Rate at which user ``j`` can decode user ``k``'s stream (``j >= k``)."""
    K = _channel_array(channels).shape[0]
    if not 0 <= k < K or not 0 <= j < K:
        raise IndexError("user index out of range")
    if j < k:
        raise ValueError(f"SIC order violated: user {j} cannot decode weaker-first stream of user {k}")
    return _pair_rate_from_gains(beam_gains(beams, channels), k, j, noise)


def noma_rates(beams: np.ndarray, channels, noise: float = 1.0) -> np.ndarray:
    return noma_rates_from_gains(beam_gains(beams, channels), noise)


def sdma_rates(beams: np.ndarray, channels, noise: float = 1.0) -> np.ndarray:
    return sdma_rates_from_gains(beam_gains(beams, channels), noise)


def weighted_objective(rates: Sequence[float], radar: RadarMetrics, weight_comm: float, weight_radar: float) -> float:
    if weight_comm < 0 or weight_radar < 0:
        raise ValueError("weights must be nonnegative")
    return float(weight_comm * np.sum(rates) + weight_radar * radar.sum_power_mw)
