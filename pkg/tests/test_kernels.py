import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lncascade.core_model import ModelParams
from lncascade.kernels import (MagnitudeKernel, OmegaIncrementCov, f_shape, interval_cov,
                               mrm_moment_integral, omega_cov_matrix, omega_increment_cov,
                               omega_mean, omega_wick_moment, rho_limit, rho_lt)

from .oracles import increment_cov_oracle, log_kernel_double_integral

K = MagnitudeKernel(l=1.0, T=200.0, lambda2=0.02)


def test_rho_lt_branches():
    assert rho_lt(0.0, K) == pytest.approx(0.02 * (math.log(200) + 1))
    assert rho_lt(0.0, K) == pytest.approx(0.125966, abs=1e-6)
    assert rho_lt(200.0, K) == 0.0
    assert rho_lt(50.0, K) == pytest.approx(0.0277259, abs=1e-7)


@given(st.floats(min_value=0.0, max_value=400.0))
def test_rho_lt_symmetric_nonincreasing(lag):
    assert rho_lt(lag, K) == rho_lt(-lag, K)
    assert rho_lt(lag + 0.5, K) <= rho_lt(lag, K) + 1e-15
    if lag >= 200.0:
        assert rho_lt(lag, K) == 0.0


def test_rho_lt_continuous_at_breaks():
    for x in (1.0, 200.0):
        assert rho_lt(x - 1e-9, K) == pytest.approx(rho_lt(x + 1e-9, K), abs=1e-9)


def test_omega_mean():
    assert omega_mean(MagnitudeKernel(1.0, 200.0, 0.0)) == 0.0
    assert omega_mean(K) == pytest.approx(-0.125966, abs=1e-6)
    # E[exp(2 omega)] = 1
    assert math.exp(2 * K.mean + 2 * K(0.0)) == pytest.approx(1.0, abs=1e-14)


def test_rho_limit():
    assert rho_limit(200.0, 200.0, 0.02) == 0.0
    assert rho_limit(200.0 / math.e, 200.0, 0.02) == pytest.approx(0.02)
    assert rho_limit(400.0, 200.0, 0.02) == 0.0
    with pytest.raises(ValueError):
        rho_limit(0.0, 200.0, 0.02)


def test_f_shape_reference_values():
    assert f_shape(0.0) == 0.0
    assert f_shape(1.0) == pytest.approx(-2 * math.log(2), abs=1e-14)
    # frozen from the quadrature oracle of tests/oracles.py
    assert f_shape(10.0) == pytest.approx(-1.4991649940196883, abs=1e-9)
    assert f_shape(2.0) == pytest.approx(-1.4780193962067667, abs=1e-9)
    assert f_shape(1.5) == pytest.approx(-1.4590035381852058, abs=1e-9)
    assert f_shape(0.5) == pytest.approx(-1.2359388247516243, abs=1e-9)
    assert abs(f_shape(64.0) + 1.5) < 2e-4
    with pytest.raises(ValueError):
        f_shape(-0.1)


@given(st.floats(min_value=1e-3, max_value=50.0))
def test_f_shape_matches_oracle_everywhere(u):
    T = 1e6
    ref = increment_cov_oracle(1.0, u, T) - math.log(T * math.exp(1.5) / u)
    assert f_shape(u) == pytest.approx(ref, abs=1e-8)


def test_increment_cov_examples():
    assert omega_increment_cov(1.0, 0.0, 200.0) == pytest.approx(math.log(200 * math.exp(1.5)))
    assert omega_increment_cov(1.0, 0.0, 200.0) == pytest.approx(6.798317, abs=1e-6)
    assert omega_increment_cov(1.0, 1.0, 200.0) == pytest.approx(math.log(200 * math.exp(1.5)) - 2 * math.log(2))
    assert omega_increment_cov(1.0, 1.0, 200.0) == pytest.approx(5.4120230054, abs=1e-9)
    assert omega_increment_cov(1.0, 201.0, 200.0) == 0.0
    with pytest.raises(ValueError):
        omega_increment_cov(0.0, 1.0, 200.0)
    with pytest.raises(ValueError):
        omega_increment_cov(1.0, -1.0, 200.0)


@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
def test_increment_cov_matches_double_integral(tau):
    T = 200.0
    hs = [0.0, tau, 2 * tau, 10 * tau, T - tau, T + 2 * tau, 0.3 * tau, T - 0.5 * tau, T + 0.5 * tau]
    for h in hs:
        ref = increment_cov_oracle(tau, h, T)
        got = omega_increment_cov(tau, h, T)
        assert got == pytest.approx(ref, rel=1e-8, abs=1e-12), h


@given(st.floats(min_value=0.1, max_value=5.0), st.floats(min_value=0.0, max_value=300.0))
def test_increment_cov_stationary_and_evaluator(tau, h):
    T = 200.0
    shifted = interval_cov((3.0, 3.0 + tau), (3.0 + h, 3.0 + h + tau), T)
    assert OmegaIncrementCov(tau, T)(h) == pytest.approx(shifted, rel=1e-9, abs=1e-10)
    if h >= T + tau:
        assert omega_increment_cov(tau, h, T) == 0.0


def test_cov_matrix_examples():
    assert omega_cov_matrix([0.0], 200.0).tolist() == [[0.0]]
    assert omega_cov_matrix([1.0], 200.0)[0, 0] == pytest.approx(math.log(200) + 1.5)
    with pytest.raises(ValueError):
        omega_cov_matrix([-1.0], 200.0)


def test_cov_matrix_reproduces_increment_cov():
    t, tau, h, T = 30.0, 1.0, 7.0, 200.0
    S = omega_cov_matrix([t - tau, t, t + h - tau, t + h], T)
    inc = (S[1, 3] - S[1, 2] - S[0, 3] + S[0, 2]) / tau**2
    assert inc == pytest.approx(omega_increment_cov(tau, h, T), rel=1e-8)


@given(st.lists(st.floats(min_value=0.0, max_value=500.0), min_size=1, max_size=12))
def test_cov_matrix_psd(times):
    S = omega_cov_matrix(times, 200.0)
    np.testing.assert_allclose(S, S.T, atol=1e-9)
    assert np.linalg.eigvalsh(S).min() >= -1e-9 * max(np.trace(S), 1.0)


def test_cov_matrix_entries_match_oracle():
    for a, b in [(3.0, 250.0), (120.0, 400.0)]:
        ref = log_kernel_double_integral((0.0, a), (0.0, b), 200.0)
        assert omega_cov_matrix([a, b], 200.0)[0, 1] == pytest.approx(ref, rel=1e-9)


def test_wick_moments():
    assert omega_wick_moment([(0.0, 1.0)], 200.0) == 0.0
    assert omega_wick_moment([(0.0, 1.0)] * 3, 200.0) == 0.0
    v = math.log(200 * math.exp(1.5))
    assert omega_wick_moment([(0.0, 1.0)] * 2, 200.0) == pytest.approx(v)
    assert omega_wick_moment([(0.0, 1.0)] * 4, 200.0) == pytest.approx(3 * v * v)
    with pytest.raises(ValueError):
        omega_wick_moment([(1.0, 1.0), (0.0, 1.0)], 200.0)


def test_mrm_moment_integral_examples():
    p = ModelParams(lambda2=0.02, T=200.0)
    assert mrm_moment_integral([(0.0, 1.0)], p) == 1.0
    assert mrm_moment_integral([(0.0, 1.0), (2.0, 5.0)], p.replace(lambda2=0.0)) == 1.0


def test_mrm_two_interval_closed_form():
    # disjoint intervals: E = mean of (T/|u - v|)^{4 lambda2} over the rectangle
    p = ModelParams(lambda2=0.03, T=50.0)
    I, J = (0.0, 2.0), (5.0, 6.0)
    from scipy import integrate
    ref, _ = integrate.dblquad(lambda v, u: (50.0 / abs(u - v)) ** 0.12, 0, 2, 5, 6, epsabs=1e-12)
    assert mrm_moment_integral([I, J], p) == pytest.approx(ref / 2.0, rel=1e-8)


def test_centered_moment_taylor_order():
    I = [(0.0, 1.0), (3.0, 4.0)]
    ratios = []
    for lam2 in (1e-2, 1e-3, 1e-4):
        p = ModelParams(lambda2=lam2, T=200.0)
        centered = mrm_moment_integral(I, p) - 1.0
        ratios.append(abs(centered - 4 * lam2 * omega_wick_moment(I, 200.0)) / lam2)
    # remainder / lambda2 is O(lambda2): shrinks tenfold per decade
    assert ratios[1] / ratios[0] == pytest.approx(0.1, rel=0.1)
    assert ratios[2] / ratios[1] == pytest.approx(0.1, rel=0.02)
