"""Scenario description, array geometry and correlated Rayleigh channel generation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg


class ConfigError(ValueError):
    """Raised for malformed or inconsistent scenario descriptions."""


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw)


@dataclass(frozen=True)
class ArrayGeometry:
    n_antennas: int = 4
    spacing_ratio: float = 0.5  # element spacing over wavelength

    def __post_init__(self):
        if int(self.n_antennas) != self.n_antennas or self.n_antennas < 1:
            raise ConfigError("n_antennas must be a positive integer")
        if not self.spacing_ratio > 0:
            raise ConfigError("spacing_ratio must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical scenario. Powers are linear milliwatts.

    ``power_diff_cap`` and ``crosscorr_cap`` are expressed in the same units as
    the beampattern (mW and mW^2 respectively).
    """

    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    n_users: int = 2
    target_angles_deg: tuple[float, ...] = (-40.0, 40.0)
    user_distances_m: tuple[float, ...] | None = None
    total_power_mw: float = 100.0
    noise_power_mw: float = 1e-12
    min_rate_bpshz: tuple[float, ...] | float = 1.0
    power_diff_cap: float = 10.0
    crosscorr_cap: float = 10.0
    spatial_factor: float = 0.0
    weight_comm: float = 10.0
    weight_radar: float = 1.0

    def __post_init__(self):
        K = self.n_users
        if int(K) != K or K < 1:
            raise ConfigError("n_users must be a positive integer")
        angles = tuple(float(a) for a in self.target_angles_deg)
        if not angles:
            raise ConfigError("at least one target angle is required")
        if len(set(angles)) != len(angles):
            raise ConfigError("target angles must be pairwise distinct")
        for a in angles:
            if not -90.0 <= a <= 90.0:
                raise ConfigError(f"target angle {a} outside [-90, 90]")
        object.__setattr__(self, "target_angles_deg", angles)

        if self.user_distances_m is None:
            dists = default_distances(K)
        else:
            dists = tuple(float(d) for d in self.user_distances_m)
        if len(dists) != K:
            raise ConfigError(f"user_distances_m has {len(dists)} entries, expected {K}")
        if any(not d > 0 for d in dists):
            raise ConfigError("user distances must be positive")
        object.__setattr__(self, "user_distances_m", dists)

        rmin = self.min_rate_bpshz
        rmin = (float(rmin),) * K if np.isscalar(rmin) else tuple(float(r) for r in rmin)
        if len(rmin) != K:
            raise ConfigError(f"min_rate_bpshz has {len(rmin)} entries, expected {K}")
        if any(r < 0 for r in rmin):
            raise ConfigError("minimum rates must be nonnegative")
        object.__setattr__(self, "min_rate_bpshz", rmin)

        for name in ("total_power_mw", "noise_power_mw", "power_diff_cap", "crosscorr_cap"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.spatial_factor <= 1.0:
            raise ConfigError("spatial_factor must lie in [0, 1]")
        if self.weight_comm < 0 or self.weight_radar < 0:
            raise ConfigError("weights must be nonnegative")
        if self.weight_comm == 0 and self.weight_radar == 0:
            raise ConfigError("weights must not both be zero")

    @property
    def n_targets(self) -> int:
        return len(self.target_angles_deg)

    @property
    def n_antennas(self) -> int:
        return self.geometry.n_antennas

    def replace(self, **changes) -> "ScenarioConfig":
        geom = changes.pop("geometry", self.geometry)
        if "n_antennas" in changes or "spacing_ratio" in changes:
            geom = ArrayGeometry(changes.pop("n_antennas", geom.n_antennas),
                                 changes.pop("spacing_ratio", geom.spacing_ratio))
        if "n_users" in changes and "user_distances_m" not in changes:
            changes["user_distances_m"] = None
        if "n_users" in changes and "min_rate_bpshz" not in changes:
            rates = set(self.min_rate_bpshz)
            changes["min_rate_bpshz"] = rates.pop() if len(rates) == 1 else 1.0
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        kw["geometry"] = geom
        return ScenarioConfig(**kw)

    # -- JSON --------------------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "n_antennas": self.geometry.n_antennas,
            "spacing_ratio": self.geometry.spacing_ratio,
            "n_users": self.n_users,
            "target_angles_deg": list(self.target_angles_deg),
            "user_distances_m": list(self.user_distances_m),
            "total_power_dbm": mw_to_dbm(self.total_power_mw),
            "noise_power_dbm": mw_to_dbm(self.noise_power_mw),
            "min_rate_bpshz": list(self.min_rate_bpshz),
            "power_diff_cap": self.power_diff_cap,
            "crosscorr_cap": self.crosscorr_cap,
            "spatial_factor": self.spatial_factor,
            "weight_comm": self.weight_comm,
            "weight_radar": self.weight_radar,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("scenario must be a JSON object")
        unknown = sorted(set(data) - set(SCENARIO_KEYS))
        if unknown:
            raise ConfigError(f"unknown scenario key(s): {', '.join(unknown)}")
        missing = sorted(set(SCENARIO_KEYS) - set(data))
        if missing:
            raise ConfigError(f"missing scenario key(s): {', '.join(missing)}")
        for key, kind in _KEY_TYPES.items():
            val = data[key]
            if kind == "number" and not _is_number(val):
                raise ConfigError(f"key '{key}': expected a number, got {val!r}")
            if kind == "int" and not (isinstance(val, int) and not isinstance(val, bool)):
                raise ConfigError(f"key '{key}': expected an integer, got {val!r}")
            if kind == "list" and not (isinstance(val, list) and all(_is_number(v) for v in val)):
                raise ConfigError(f"key '{key}': expected a list of numbers, got {val!r}")
            if kind == "list|null" and val is not None and not (
                    isinstance(val, list) and all(_is_number(v) for v in val)):
                raise ConfigError(f"key '{key}': expected a list of numbers or null, got {val!r}")
            if kind == "number|list" and not (_is_number(val) or (
                    isinstance(val, list) and all(_is_number(v) for v in val))):
                raise ConfigError(f"key '{key}': expected a number or list of numbers, got {val!r}")
        try:
            return cls(
                geometry=ArrayGeometry(data["n_antennas"], float(data["spacing_ratio"])),
                n_users=data["n_users"],
                target_angles_deg=tuple(data["target_angles_deg"]),
                user_distances_m=None if data["user_distances_m"] is None else tuple(data["user_distances_m"]),
                total_power_mw=dbm_to_mw(float(data["total_power_dbm"])),
                noise_power_mw=dbm_to_mw(float(data["noise_power_dbm"])),
                min_rate_bpshz=data["min_rate_bpshz"] if _is_number(data["min_rate_bpshz"])
                else tuple(data["min_rate_bpshz"]),
                power_diff_cap=float(data["power_diff_cap"]),
                crosscorr_cap=float(data["crosscorr_cap"]),
                spatial_factor=float(data["spatial_factor"]),
                weight_comm=float(data["weight_comm"]),
                weight_radar=float(data["weight_radar"]),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


SCENARIO_KEYS = (
    "n_antennas", "spacing_ratio", "n_users", "target_angles_deg", "user_distances_m",
    "total_power_dbm", "noise_power_dbm", "min_rate_bpshz", "power_diff_cap",
    "crosscorr_cap", "spatial_factor", "weight_comm", "weight_radar",
)

_KEY_TYPES = {
    "n_antennas": "int", "spacing_ratio": "number", "n_users": "int",
    "target_angles_deg": "list", "user_distances_m": "list|null",
    "total_power_dbm": "number", "noise_power_dbm": "number", "min_rate_bpshz": "number|list",
    "power_diff_cap": "number", "crosscorr_cap": "number", "spatial_factor": "number",
    "weight_comm": "number", "weight_radar": "number",
}


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def load_config(path: str | Path) -> ScenarioConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return ScenarioConfig.from_json_dict(data)


def default_distances(n_users: int, near: float = 50.0, far: float = 200.0) -> tuple[float, ...]:
    if n_users == 1:
        return (near,)
    return tuple(float(d) for d in np.linspace(near, far, n_users))


def default_scenario(n_users: int = 2, spatial_factor: float = 0.0, **overrides) -> ScenarioConfig:
    """Default evaluation scenario: 4-antenna ULA, targets at -40/40 deg, 20 dBm budget."""
    base = dict(
        geometry=ArrayGeometry(4, 0.5),
        n_users=n_users,
        target_angles_deg=(-40.0, 40.0),
        total_power_mw=dbm_to_mw(20.0),
        noise_power_mw=dbm_to_mw(-120.0),
        min_rate_bpshz=1.0,
        power_diff_cap=10.0,
        crosscorr_cap=10.0,
        spatial_factor=spatial_factor,
        weight_comm=10.0,
        weight_radar=1.0,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


# -- array and propagation ---------------------------------------------------------


def steering_vector(angle_deg: float, geometry: ArrayGeometry) -> np.ndarray:
    """ULA response ``exp(j 2 pi (d/lambda) n sin(theta))`` for ``n = 0..N-1``."""
    if not -90.0 <= angle_deg <= 90.0:
        raise ValueError(f"angle {angle_deg} outside [-90, 90] degrees")
    n = np.arange(geometry.n_antennas)
    phase = 2.0 * np.pi * geometry.spacing_ratio * n * np.sin(np.deg2rad(angle_deg))
    return np.exp(1j * phase)


def path_loss_db(distance_m: float) -> float:
    if not distance_m > 0:
        raise ValueError("distance must be positive")
    return 32.6 + 36.7 * math.log10(distance_m)


def spatial_correlation_matrix(t: float, n_users: int) -> np.ndarray:
    if not 0.0 <= t <= 1.0:
        raise ValueError("spatial factor must lie in [0, 1]")
    idx = np.arange(n_users)
    lag = np.abs(idx[:, None] - idx[None, :])
    # 0**0 == 1 keeps the diagonal at one for t = 0
    return np.power(float(t), lag).astype(float)


def psd_sqrt(R: np.ndarray) -> np.ndarray:
    lam, V = np.linalg.eigh(R)
    return (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.conj().T


@dataclass(frozen=True)
class ChannelSet:
    """Per-user channels in NOMA decoding order (user 0 weakest).

    ``channels[k]`` is already divided by the noise standard deviation, so all
    rate expressions use unit noise power. ``ordering[k]`` is the index of the
    stored user in the configuration's distance list.
    """

    channels: np.ndarray  # (K, N) complex
    large_scale_db: np.ndarray
    ordering: tuple[int, ...]
    noise_power: float = 1.0

    @property
    def n_users(self) -> int:
        return self.channels.shape[0]

    def gram(self, k: int) -> np.ndarray:
        h = self.channels[k]
        return np.outer(h, h.conj())


def rng_for(seed: int | Sequence[int]) -> np.random.Generator:
    """Counter-based generator; a tuple seed ``(master, index)`` gives independent substreams."""
    entropy = [int(seed)] if np.isscalar(seed) else [int(s) for s in seed]
    if any(s < 0 for s in entropy):
        raise ValueError("seeds must be nonnegative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def small_scale_fading(n_antennas: int, n_users: int, t: float, rng: np.random.Generator) -> np.ndarray:
    """``H_w R^(1/2)`` with unit-norm columns of ``H_w``; returns (N, K)."""
    Hw = (rng.standard_normal((n_antennas, n_users)) + 1j * rng.standard_normal((n_antennas, n_users))) / math.sqrt(2)
    Hw /= np.linalg.norm(Hw, axis=0, keepdims=True)
    return Hw @ psd_sqrt(spatial_correlation_matrix(t, n_users))


def generate_channels(config: ScenarioConfig, seed: int | Sequence[int]) -> ChannelSet:
    order = sorted(range(config.n_users), key=lambda i: (-config.user_distances_m[i], i))
    loss_db = np.array([path_loss_db(config.user_distances_m[i]) for i in order])
    rng = rng_for(seed)
    Ht = small_scale_fading(config.n_antennas, config.n_users, config.spatial_factor, rng)
    gain = 10.0 ** (-loss_db / 20.0) / math.sqrt(config.noise_power_mw)
    H = (Ht * gain[None, :]).T
    return ChannelSet(channels=np.ascontiguousarray(H), large_scale_db=loss_db, ordering=tuple(order))
