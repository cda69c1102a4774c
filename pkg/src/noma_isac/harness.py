"""Experiment drivers: single solves, weight sweeps, Monte-Carlo campaigns, beampatterns.

Output schemas
--------------
``report.json``
    Full solve report (see :func:`report_to_dict`); keys are sorted and no
    wall-clock data is included, so identical inputs give identical bytes.
``beamformers.csv``
    ``user,config_index,antenna,real,imag`` with ``user`` in SIC order
    (1 = weakest) and ``config_index`` the 0-based position in the scenario's
    distance list.
trial CSV (sweep / montecarlo)
    ``seed,scheme,rho_c,rho_r,throughput_bpshz,sensing_power_mw,crosscorr,``
    ``objective,penalty_residual,inner_iters_total,outer_iters,status`` and,
    only when timing is requested, a trailing ``wall_time_s`` column.
    Monte-Carlo files end with ``mean``/``median``/``std`` rows (in the
    ``seed`` column) aggregated over converged trials; their ``status`` field
    reads ``n=<count>``.
beampattern CSV
    ``angle_deg,power_mw`` on a grid covering [-90, 90] inclusive.

Floats are written with 12 significant digits.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import metrics
from .optimizer import Mode, Scene, SolveReport, SolverConfig, Status, solve
from .scene import ScenarioConfig, load_config

DEFAULT_WEIGHTS = tuple((rc, 1.0) for rc in (0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0))
DEFAULT_TRIALS = 50

TRIAL_COLUMNS = (
    "seed", "scheme", "rho_c", "rho_r", "throughput_bpshz", "sensing_power_mw", "crosscorr",
    "objective", "penalty_residual", "inner_iters_total", "outer_iters", "status",
)


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def trial_seed(master: int, index: int) -> int:
    """Independent 64-bit channel seed for trial ``index`` of a campaign."""
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SweepSpec:
    weights: tuple[tuple[float, float], ...] = DEFAULT_WEIGHTS
    seeds: tuple[int, ...] = (0,)
    scheme: Mode = Mode.NOMA

    def __post_init__(self):
        if not self.weights or not self.seeds:
            raise ValueError("weights and seeds must be nonempty")
        for rc, rr in self.weights:
            if rc < 0 or rr < 0 or (rc == 0 and rr == 0):
                raise ValueError(f"invalid weight pair ({rc}, {rr})")


@dataclass
class TrialRecord:
    seed: int
    scheme: str
    rho_c: float
    rho_r: float
    throughput_bpshz: float
    sensing_power_mw: float
    crosscorr: float
    objective: float
    penalty_residual: float
    inner_iters_total: int
    outer_iters: int
    status: str
    wall_time_s: float = math.nan

    def row(self, with_time: bool = False) -> list[str]:
        values = [getattr(self, c) for c in TRIAL_COLUMNS]
        if with_time:
            values.append(self.wall_time_s)
        return [fmt(v) for v in values]


def _record(seed: int, scheme: Mode, rc: float, rr: float, report: SolveReport, wall: float) -> TrialRecord:
    ok = report.rates is not None
    return TrialRecord(
        seed=seed, scheme=scheme.value, rho_c=rc, rho_r=rr,
        throughput_bpshz=report.throughput if ok else math.nan,
        sensing_power_mw=report.radar.sum_power_mw if ok else math.nan,
        crosscorr=report.radar.mean_sq_crosscorr if ok else math.nan,
        objective=report.objective, penalty_residual=report.penalty_residual,
        inner_iters_total=report.inner_iters_total, outer_iters=report.outer_iters,
        status=report.status.value, wall_time_s=wall,
    )


def _run_trial(args) -> TrialRecord:
    config, seed, scheme, rc, rr, solver_config = args
    t0 = time.perf_counter()
    cfg = config.replace(weight_comm=rc, weight_radar=rr)
    try:
        report = solve(Scene.generate(cfg, seed), solver_config, scheme)
    except Exception as exc:  # a campaign records failures instead of aborting
        return TrialRecord(seed, scheme.value, rc, rr, math.nan, math.nan, math.nan, math.nan,
                           math.nan, 0, 0, f"Error:{type(exc).__name__}", time.perf_counter() - t0)
    return _record(seed, scheme, rc, rr, report, time.perf_counter() - t0)


def _map(tasks: list, workers: int) -> list[TrialRecord]:
    if workers <= 1 or len(tasks) <= 1:
        return [_run_trial(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_trial, tasks))


def write_trials(records: Sequence[TrialRecord], out_csv: str | Path, with_time: bool = False,
                 extra_rows: Iterable[list[str]] = ()) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(TRIAL_COLUMNS) + (["wall_time_s"] if with_time else []))
    for r in records:
        w.writerow(r.row(with_time))
    for row in extra_rows:
        w.writerow(row + ([""] if with_time else []))
    Path(out_csv).write_text(buf.getvalue())


# -- operations ------------------------------------------------------------------


def _config(config: ScenarioConfig | str | Path) -> ScenarioConfig:
    return config if isinstance(config, ScenarioConfig) else load_config(config)


def report_to_dict(report: SolveReport, config: ScenarioConfig, seed, solver_config: SolverConfig,
                   scene: Scene | None = None) -> dict:
    def cplx(a):
        return None if a is None else {"real": np.real(a).tolist(), "imag": np.imag(a).tolist()}

    out = {
        "status": report.status.value,
        "scheme": report.mode.value,
        "seed": seed,
        "message": report.message,
        "scenario": config.to_json_dict(),
        "solver": asdict(solver_config),
        "objective": report.objective,
        "throughput_bpshz": report.throughput,
        "rates_bpshz": None if report.rates is None else report.rates.tolist(),
        "general_rank_rates_bpshz": None if report.general_rank_rates is None
        else report.general_rank_rates.tolist(),
        "radar": None if report.radar is None else report.radar.as_dict(),
        "penalty_residual": report.penalty_residual,
        "outer_iters": report.outer_iters,
        "inner_iters_total": report.inner_iters_total,
        "iterations": report.records,
        "beamformers": cplx(report.beamformers),
        "covariances": cplx(report.covariances),
    }
    if scene is not None:
        out["user_order"] = list(scene.channels.ordering)
        out["large_scale_db"] = scene.channels.large_scale_db.tolist()
    return _jsonable(out)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    return obj


def write_beamformers(report: SolveReport, scene: Scene, out_csv: str | Path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["user", "config_index", "antenna", "real", "imag"])
    if report.beamformers is not None:
        for k, wk in enumerate(report.beamformers):
            for n, v in enumerate(wk):
                w.writerow([k + 1, scene.channels.ordering[k], n, fmt(v.real), fmt(v.imag)])
    Path(out_csv).write_text(buf.getvalue())


def run_solve(config: ScenarioConfig | str | Path, seed: int, scheme: Mode | str = Mode.NOMA,
              out_path: str | Path | None = None, solver_config: SolverConfig = SolverConfig()) -> SolveReport:
    """Solve one scenario; with ``out_path`` (a directory) write report.json and beamformers.csv."""
    cfg = _config(config)
    scheme = Mode(scheme)
    scene = Scene.generate(cfg, seed)
    report = solve(scene, solver_config, scheme)
    if out_path is not None:
        out = Path(out_path)
        out.mkdir(parents=True, exist_ok=True)
        data = report_to_dict(report, cfg, seed, solver_config, scene)
        (out / "report.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        write_beamformers(report, scene, out / "beamformers.csv")
    return report


def run_sweep(config: ScenarioConfig | str | Path, spec: SweepSpec, out_csv: str | Path | None = None,
              solver_config: SolverConfig = SolverConfig(), workers: int = 1,
              with_time: bool = False) -> list[TrialRecord]:
    cfg = _config(config)
    tasks = [(cfg, s, spec.scheme, rc, rr, solver_config) for rc, rr in spec.weights for s in spec.seeds]
    # rows keep request order (weights outer, seeds inner) whatever the worker count
    records = _map(tasks, workers)
    if out_csv is not None:
        write_trials(records, out_csv, with_time)
    return records


def aggregate_rows(records: Sequence[TrialRecord]) -> list[list[str]]:
    good = [r for r in records if r.status == Status.CONVERGED.value]
    numeric = ("throughput_bpshz", "sensing_power_mw", "crosscorr", "objective", "penalty_residual",
               "inner_iters_total", "outer_iters")
    rows = []
    for name, fn in (("mean", np.mean), ("median", np.median), ("std", np.std)):
        row = {c: "" for c in TRIAL_COLUMNS}
        row["seed"] = name
        if records:
            row["scheme"] = records[0].scheme
            row["rho_c"] = fmt(records[0].rho_c)
            row["rho_r"] = fmt(records[0].rho_r)
        for c in numeric:
            row[c] = fmt(float(fn([getattr(r, c) for r in good]))) if good else "nan"
        row["status"] = f"n={len(good)}"
        rows.append([row[c] for c in TRIAL_COLUMNS])
    return rows


def run_montecarlo(config: ScenarioConfig | str | Path, n_trials: int = DEFAULT_TRIALS,
                   scheme: Mode | str = Mode.NOMA, out_csv: str | Path | None = None,
                   master_seed: int = 0, solver_config: SolverConfig = SolverConfig(),
                   workers: int = 1, with_time: bool = False) -> list[TrialRecord]:
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    cfg = _config(config)
    scheme = Mode(scheme)
    tasks = [(cfg, trial_seed(master_seed, i), scheme, cfg.weight_comm, cfg.weight_radar, solver_config)
             for i in range(n_trials)]
    records = _map(tasks, workers)
    if out_csv is not None:
        write_trials(records, out_csv, with_time, aggregate_rows(records))
    return records


class NotConvergedError(RuntimeError):
    pass


def beampattern_grid(step_deg: float) -> np.ndarray:
    if not step_deg > 0:
        raise ValueError("grid step must be positive")
    n = int(math.floor(180.0 / step_deg + 1e-9))
    grid = -90.0 + step_deg * np.arange(n + 1)
    if grid[-1] < 90.0 - 1e-9:
        grid = np.append(grid, 90.0)
    return np.clip(grid, -90.0, 90.0)


def export_beampattern(report: SolveReport | dict, grid_step_deg: float = 1.0,
                       out_csv: str | Path | None = None, config: ScenarioConfig | None = None) -> np.ndarray:
    """Beampattern of a converged solution; returns ``(angles, powers)`` as a 2-column array."""
    if isinstance(report, dict):
        status = report["status"]
        bf = report["beamformers"]
        beams = None if bf is None else np.asarray(bf["real"]) + 1j * np.asarray(bf["imag"])
        config = ScenarioConfig.from_json_dict(report["scenario"])
    else:
        status = report.status.value
        beams = report.beamformers
        if config is None:
            raise ValueError("config is required for an in-memory report")
    if status != Status.CONVERGED.value or beams is None:
        raise NotConvergedError(f"refusing to export a beampattern for a report with status {status}")
    grid = beampattern_grid(grid_step_deg)
    powers = metrics.beampattern(metrics.transmit_covariance(beams), grid, config.geometry)
    table = np.column_stack([grid, powers])
    if out_csv is not None:
        write_beampattern(table, out_csv)
    return table


def write_beampattern(table: np.ndarray, out_csv: str | Path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["angle_deg", "power_mw"])
    for angle, power in table:
        w.writerow([fmt(angle), fmt(power)])
    Path(out_csv).write_text(buf.getvalue())


def local_maxima(table: np.ndarray) -> list[float]:
    p = table[:, 1]
    return [float(table[i, 0]) for i in range(1, len(p) - 1) if p[i] >= p[i - 1] and p[i] >= p[i + 1]]


def fit_throughput(scene: Scene, target_bpshz: float, scheme: Mode = Mode.NOMA,
                   solver_config: SolverConfig = SolverConfig(), tol_bpshz: float = 0.1,
                   max_steps: int = 20) -> SolveReport:
    """Bisect the communication weight (radar weight 1) until throughput is near the target.

    Returns the converged report whose throughput is closest to the target.
    """
    lo, hi = -3.0, 3.0  # log10 of rho_c
    best: SolveReport | None = None

    def run(log_rc: float) -> SolveReport:
        nonlocal best
        cfg = scene.config.replace(weight_comm=10.0 ** log_rc, weight_radar=1.0)
        rep = solve(Scene(cfg, scene.channels), solver_config, scheme)
        if rep.status is Status.CONVERGED and (
                best is None or abs(rep.throughput - target_bpshz) < abs(best.throughput - target_bpshz)):
            best = rep
        return rep

    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        rep = run(mid)
        if rep.status is not Status.CONVERGED:
            hi = mid
            continue
        if abs(rep.throughput - target_bpshz) <= tol_bpshz:
            break
        if rep.throughput < target_bpshz:
            lo = mid
        else:
            hi = mid
    if best is None:
        raise NotConvergedError("no converged solve while fitting throughput")
    return best


@dataclass
class IdealBounds:
    throughput_bpshz: float
    sensing_power_mw: float
    statuses: dict = field(default_factory=dict)


def ideal_bounds(scene: Scene, access: Mode = Mode.NOMA,
                 solver_config: SolverConfig = SolverConfig()) -> IdealBounds:
    """Communication-only throughput and sensing-only power for one channel draw."""
    comm = solve(scene, solver_config, Mode.COMM_ONLY, comm_access=access)
    sense = solve(scene, solver_config, Mode.SENSE_ONLY)
    return IdealBounds(
        throughput_bpshz=comm.throughput,
        sensing_power_mw=sense.radar.sum_power_mw if sense.radar else math.nan,
        statuses={"comm": comm.status.value, "sense": sense.status.value},
    )
