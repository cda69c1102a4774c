import math

import numpy as np
import pytest

from noma_isac.optimizer import (
    InfeasibleError,
    IterationState,
    Mode,
    RankDeficiencyError,
    Scene,
    SolverConfig,
    Status,
    build_subproblem,
    constraint_violations,
    extract_beamformers,
    inner_loop,
    initialize_feasible,
    solve,
)
from noma_isac.conic.program import coords_from_hermitian
from noma_isac.scene import default_scenario, steering_vector
from noma_isac.surrogates import surrogate_rate


@pytest.fixture(scope="module")
def scene2():
    return Scene.generate(default_scenario(n_users=2), 1)


def point_for(sub, covs, gammas):
    x = np.zeros(sub.program.n_coords)
    for var, W in zip(sub.W, covs):
        x[var.offset:var.offset + var.ncoords] = coords_from_hermitian(W)
    for var, g in zip(sub.gamma, gammas):
        x[var.offset] = g
    return x


def test_census_noma(scene2):
    W0 = initialize_feasible(scene2)
    census = build_subproblem(scene2, W0, 1e5).program.census()
    assert census == {"eq": 4, "ge": 4, "soc": 1, "log": 3}


def test_census_sdma_and_sense_only(scene2):
    W0 = initialize_feasible(scene2, Mode.SDMA)
    assert build_subproblem(scene2, W0, 1e5, Mode.SDMA).program.census()["log"] == 2
    census = build_subproblem(scene2, W0, 1e5, Mode.SENSE_ONLY).program.census()
    assert census["log"] == 0 and census["soc"] == 1


def test_comm_only_objective_has_no_radar_terms(scene2):
    W0 = initialize_feasible(scene2, Mode.COMM_ONLY)
    cfg_a = scene2.config.replace(weight_radar=0.0)
    cfg_b = scene2.config.replace(weight_radar=50.0)
    pa = build_subproblem(Scene(cfg_a, scene2.channels), W0, 1e5, Mode.COMM_ONLY).program
    pb = build_subproblem(Scene(cfg_b, scene2.channels), W0, 1e5, Mode.COMM_ONLY).program
    assert pa.objective.coeffs == pb.objective.coeffs
    assert pa.census()["soc"] == 0


@pytest.mark.parametrize("mode", [Mode.NOMA, Mode.SDMA])
def test_expansion_point_is_feasible(scene2, mode):
    W0 = initialize_feasible(scene2, mode)
    sub = build_subproblem(scene2, W0, 1e5, mode)
    K = scene2.K
    if mode is Mode.NOMA:
        gammas = [min(surrogate_rate(j, k, W0, scene2.channels)(W0) for j in range(k, K)) for k in range(K)]
    else:
        from noma_isac.surrogates import sdma_surrogate_rate
        gammas = [sdma_surrogate_rate(k, W0, scene2.channels)(W0) for k in range(K)]
    assert sub.program.max_violation(point_for(sub, W0, gammas)) <= 1e-6


def test_initialization_single_user_steering():
    cfg = default_scenario(n_users=1, target_angles_deg=(30.0,), min_rate_bpshz=0.0)
    scene = Scene.generate(cfg, 0)
    a = steering_vector(30.0, cfg.geometry)
    W = (cfg.total_power_mw / cfg.n_antennas) * np.outer(a, a.conj())
    np.testing.assert_allclose(np.diag(W).real, cfg.total_power_mw / cfg.n_antennas)
    viol = constraint_violations(scene, W[None])
    assert max(viol.values()) <= 1e-9
    W0 = initialize_feasible(scene)
    assert max(constraint_violations(scene, W0).values()) <= 1e-6


def test_initialization_default_scenario(scene2):
    W0 = initialize_feasible(scene2)
    viol = constraint_violations(scene2, W0)
    assert viol["min_rate"] <= 1e-6 and viol["per_antenna"] <= 1e-6
    assert viol["power_diff"] <= 1e-6 and viol["crosscorr"] <= 1e-6


def test_initialization_rejects_huge_rate(scene2):
    cfg = scene2.config.replace(min_rate_bpshz=1000.0)
    with pytest.raises(InfeasibleError):
        initialize_feasible(Scene(cfg, scene2.channels))
    assert solve(Scene(cfg, scene2.channels)).status is Status.INFEASIBLE


def test_extract_exact_rank_one():
    rng = np.random.default_rng(0)
    w = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    got = extract_beamformers(np.outer(w, w.conj())[None])[0]
    phase = np.vdot(got, w) / abs(np.vdot(got, w))
    np.testing.assert_allclose(got * phase, w, atol=1e-10)


def test_extract_perturbed_rank_one():
    rng = np.random.default_rng(1)
    w = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    W = np.outer(w, w.conj()) + 1e-8 * np.eye(4)
    got = extract_beamformers(W[None], tol=1e-4)[0]
    phase = np.vdot(got, w) / abs(np.vdot(got, w))
    assert np.linalg.norm(got * phase - w) / np.linalg.norm(w) <= 1e-3


def test_extract_rejects_rank_two():
    with pytest.raises(RankDeficiencyError):
        extract_beamformers(np.eye(2, dtype=complex)[None], tol=1e-4)


def test_sense_only_optimum():
    cfg = default_scenario(n_users=1, target_angles_deg=(40.0,))
    rep = solve(Scene.generate(cfg, 0), mode=Mode.SENSE_ONLY)
    assert rep.status is Status.CONVERGED
    assert rep.radar.beampattern_mw[0] == pytest.approx(4 * 100.0, rel=1e-3)


def test_comm_only_equal_gain_optimum():
    cfg = default_scenario(n_users=1)
    scene = Scene.generate(cfg, 3)
    rep = solve(scene, mode=Mode.COMM_ONLY)
    h = scene.channels.channels[0]
    ideal = math.log2(1 + cfg.total_power_mw / cfg.n_antennas * np.abs(h).sum() ** 2)
    assert rep.status is Status.CONVERGED
    assert rep.throughput == pytest.approx(ideal, rel=1e-3)


def test_single_user_noma_equals_sdma():
    scene = Scene.generate(default_scenario(n_users=1), 5)
    a, b = solve(scene, mode=Mode.NOMA), solve(scene, mode=Mode.SDMA)
    assert a.objective == pytest.approx(b.objective, rel=1e-6)


def test_converged_state_stops_after_one_inner_iteration(scene2):
    cfg = SolverConfig()
    rep = solve(scene2, cfg)
    assert rep.status is Status.CONVERGED
    state = IterationState(W_n=rep.covariances, eta=rep.records[-1]["eta"])
    inner_loop(state, scene2, cfg)
    assert state.inner_count == 1


def test_report_contents(scene2):
    rep = solve(scene2)
    assert rep.status is Status.CONVERGED
    assert rep.penalty_residual <= 1e-4
    assert rep.beamformers.shape == (2, 4)
    np.testing.assert_allclose(rep.rates, rep.general_rank_rates, atol=1e-3)
    assert len(rep.objective_trace) == rep.inner_iters_total


def inner_monotone(records, slack=1e-6):
    """True when the objective never drops by more than the slack inside an outer iteration."""
    for prev, cur in zip(records, records[1:]):
        if prev["outer"] == cur["outer"] and cur["objective"] < prev["objective"] - slack * abs(prev["objective"]):
            return False
    return True


def test_inner_loop_monotone_over_random_scenes():
    for seed in range(20):
        rep = solve(Scene.generate(default_scenario(n_users=3), seed))
        assert rep.status is Status.CONVERGED, seed
        assert inner_monotone(rep.records), seed


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(eta_shrink=1.5)
    with pytest.raises(ValueError):
        SolverConfig(penalty_tol=0)
