import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noma_isac import metrics
from noma_isac.metrics import ValidationError
from noma_isac.scene import ArrayGeometry, steering_vector

GEO = ArrayGeometry(4, 0.5)


def rand_beams(rng, K, N, scale=1.0):
    return scale * (rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N)))


def rand_psd(rng, N):
    A = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    return A @ A.conj().T


seeds = st.integers(0, 2**32 - 1)


def test_transmit_covariance_examples():
    R = metrics.transmit_covariance(np.array([[math.sqrt(7.0), 0, 0]]))
    np.testing.assert_allclose(R, np.diag([7.0, 0, 0]))
    beams = np.array([[math.sqrt(2), 0], [0, math.sqrt(3)]])
    assert np.trace(metrics.transmit_covariance(beams)).real == pytest.approx(5.0)
    with pytest.raises(ValidationError):
        metrics.transmit_covariance(np.zeros((0, 3)))


@given(seeds, st.integers(1, 5), st.integers(1, 6))
def test_transmit_covariance_hermitian_psd(seed, K, N):
    R = metrics.transmit_covariance(rand_beams(np.random.default_rng(seed), K, N))
    np.testing.assert_allclose(R, R.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(R).min() >= -1e-9 * max(1.0, np.abs(R).max())


def test_beampattern_isotropic_and_coherent():
    Pt = 100.0
    R = Pt / 4 * np.eye(4)
    for angle in (-90, -40, 0, 13.5, 90):
        assert metrics.beampattern_power(R, angle, GEO) == pytest.approx(Pt)
    a = steering_vector(30.0, GEO)
    R = 2.0 * np.outer(a, a.conj())
    assert metrics.beampattern_power(R, 30.0, GEO) == pytest.approx(4 * 2.0 * 4)


def test_beampattern_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        metrics.beampattern_power(np.array([[1, 1], [0, 1]], dtype=complex), 0.0, ArrayGeometry(2))


@given(seeds, st.integers(1, 4))
@settings(max_examples=30)
def test_beampattern_matches_beam_sum(seed, K):
    rng = np.random.default_rng(seed)
    beams = rand_beams(rng, K, 4)
    grid = np.arange(-90, 91, 1.0)
    via_cov = metrics.beampattern(metrics.transmit_covariance(beams), grid, GEO)
    direct = np.array([sum(abs(np.vdot(steering_vector(t, GEO), w)) ** 2 for w in beams) for t in grid])
    np.testing.assert_allclose(via_cov, direct, rtol=1e-10, atol=1e-12 * direct.max())


def brute_crosscorr(R, angles):
    A = [steering_vector(t, GEO) for t in angles]
    pairs = list(itertools.combinations(range(len(A)), 2))
    return sum(abs(np.vdot(A[i], R @ A[j])) ** 2 for i, j in pairs) / len(pairs)


def test_crosscorr_examples():
    rng = np.random.default_rng(3)
    R = rand_psd(rng, 4)
    a1, a2 = steering_vector(-40, GEO), steering_vector(40, GEO)
    assert metrics.mean_sq_crosscorr(R, (-40, 40), GEO) == pytest.approx(abs(np.vdot(a1, R @ a2)) ** 2)
    assert metrics.mean_sq_crosscorr(np.zeros((4, 4)), (-40, 40), GEO) == 0.0
    assert metrics.mean_sq_crosscorr(R, (10,), GEO) == 0.0
    with pytest.raises(ValidationError):
        metrics.mean_sq_crosscorr(R, (10, 10), GEO)


@given(seeds, st.integers(2, 5))
def test_crosscorr_matches_brute_force(seed, M):
    rng = np.random.default_rng(seed)
    R = rand_psd(rng, 4)
    angles = tuple(float(a) for a in rng.choice(np.arange(-89, 90), size=M, replace=False))
    ref = brute_crosscorr(R, angles)
    assert metrics.mean_sq_crosscorr(R, angles, GEO) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_pair_rate_examples():
    h = np.array([[1.0, 0.0], [0.0, 1.0]])
    beams = np.array([[0.0, 0.0], [0.0, 1.0]])
    assert metrics.noma_pair_rate(beams, h, 1, 1) == pytest.approx(1.0)
    # signal 3, interference 1, unit noise
    h = np.array([[1.0, 1.0], [0.0, 1.0]])
    beams = np.array([[math.sqrt(3), 0.0], [0.0, 1.0]])
    rate = metrics.noma_pair_rate(beams, h, 0, 0, noise=1.0)
    assert rate == pytest.approx(math.log2(1 + 3 / 2))
    assert metrics.noma_pair_rate(np.array([[0, 0], [0, 1.0]]), h, 0, 0) == 0.0
    with pytest.raises(ValueError):
        metrics.noma_pair_rate(beams, h, 1, 0)


def test_noma_rates_min_over_decoders():
    # R_{1->1} = 2 (SINR 3) and R_{1->2} = 1.5 (SINR 2^1.5 - 1)
    h = np.array([[1.0, 0.0], [0.0, 1.0]])
    a2 = 2 * (2 ** 1.5 - 1)
    beams = np.array([[math.sqrt(3), math.sqrt(a2)], [0.0, 1.0]])
    assert metrics.noma_pair_rate(beams, h, 0, 0) == pytest.approx(2.0)
    assert metrics.noma_pair_rate(beams, h, 0, 1) == pytest.approx(1.5)
    rates = metrics.noma_rates(beams, h)
    assert rates[0] == pytest.approx(1.5)
    assert rates[1] == pytest.approx(1.0)


def test_zero_beams_give_zero_rates():
    h = np.random.default_rng(0).standard_normal((3, 4))
    np.testing.assert_array_equal(metrics.noma_rates(np.zeros((3, 4)), h), 0.0)
    np.testing.assert_array_equal(metrics.sdma_rates(np.zeros((3, 4)), h), 0.0)


def test_dimension_mismatch():
    with pytest.raises(ValidationError):
        metrics.noma_rates(np.ones((2, 3)), np.ones((2, 4)))


@given(seeds, st.integers(1, 6))
def test_single_user_noma_equals_sdma(seed, N):
    rng = np.random.default_rng(seed)
    h, w = rand_beams(rng, 1, N), rand_beams(rng, 1, N)
    np.testing.assert_array_equal(metrics.noma_rates(w, h), metrics.sdma_rates(w, h))
    assert metrics.noma_rates(w, h)[0] == pytest.approx(math.log2(1 + abs(np.vdot(h[0], w[0])) ** 2))


def test_sdma_symmetric_and_orthogonal():
    rng = np.random.default_rng(5)
    h, w = rand_beams(rng, 2, 3), rand_beams(rng, 2, 3)
    r = metrics.sdma_rates(w, h)
    r_swapped = metrics.sdma_rates(w[::-1], h[::-1])
    np.testing.assert_allclose(r, r_swapped[::-1], rtol=1e-14)
    h = np.array([[1.0, 0, 0], [0, 2.0, 0]])
    w = np.array([[0.5, 0, 0], [0, 1.5, 0]])
    np.testing.assert_allclose(metrics.sdma_rates(w, h), [math.log2(1.25), math.log2(1 + 9.0)])


@given(seeds, st.integers(2, 5))
@settings(max_examples=40)
def test_removing_stronger_user_never_hurts(seed, K):
    rng = np.random.default_rng(seed)
    h, w = rand_beams(rng, K, 4), rand_beams(rng, K, 4)
    k = int(rng.integers(0, K - 1))
    i = int(rng.integers(k + 1, K))
    w2 = w.copy()
    w2[i] = 0
    for j in range(k, K):
        assert metrics.noma_pair_rate(w2, h, k, j) >= metrics.noma_pair_rate(w, h, k, j) - 1e-12


@given(seeds, st.integers(1, 5))
@settings(max_examples=40)
def test_rates_phase_invariant(seed, K):
    rng = np.random.default_rng(seed)
    h, w = rand_beams(rng, K, 4), rand_beams(rng, K, 4)
    rotated = w * np.exp(1j * rng.uniform(0, 2 * np.pi, size=(K, 1)))
    np.testing.assert_allclose(metrics.noma_rates(rotated, h), metrics.noma_rates(w, h), rtol=1e-10)
    np.testing.assert_allclose(metrics.sdma_rates(rotated, h), metrics.sdma_rates(w, h), rtol=1e-10)


@given(seeds, st.integers(2, 5))
@settings(max_examples=40)
def test_noma_rate_is_min_of_pairs(seed, K):
    rng = np.random.default_rng(seed)
    h, w = rand_beams(rng, K, 4), rand_beams(rng, K, 4)
    rates = metrics.noma_rates(w, h)
    for k in range(K - 1):
        assert rates[k] == pytest.approx(min(metrics.noma_pair_rate(w, h, k, j) for j in range(k, K)))


def test_weighted_objective():
    radar = metrics.RadarMetrics((150.0, 150.0), 0.0, 300.0)
    assert metrics.weighted_objective([5.0, 7.0], radar, 10, 1) == pytest.approx(420.0)
    assert metrics.weighted_objective([5.0, 7.0], radar, 1, 0) == pytest.approx(12.0)
    assert metrics.weighted_objective([5.0, 7.0], radar, 0, 1) == pytest.approx(300.0)
    with pytest.raises(ValueError):
        metrics.weighted_objective([1.0], radar, -1, 1)
