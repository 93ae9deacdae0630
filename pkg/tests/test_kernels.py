import math

import mpmath
import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from ksl._bessel import bessel_k, log_bessel_k
from ksl.errors import DimensionMismatchError, NumericalError, ValidationError
from ksl.kernels import (Kernel, cross_gram, eval_kernel, gaussian_from_gamma, gram, kernel_from_config,
                         sobolev_profile)


def test_gaussian_identity_is_one():
    k = Kernel.gaussian(0.5)
    assert eval_kernel(k, [0.3, -1.0], [0.3, -1.0]) == 1.0


def test_gaussian_squared_distance_two():
    assert eval_kernel(Kernel.gaussian(0.5), [0.0, 0.0], [1.0, 1.0]) == pytest.approx(math.exp(-1), rel=1e-15)


def test_sobolev_limit_tau_three_halves_d1():
    k = Kernel.sobolev(1.5, 1)
    assert eval_kernel(k, [0.2], [0.2]) == pytest.approx(2 * math.sqrt(math.pi), rel=1e-14)
    assert k.diagonal == pytest.approx(3.5449077018110318, rel=1e-14)
    assert k.kappa == pytest.approx(math.sqrt(2 * math.sqrt(math.pi)), rel=1e-14)


@pytest.mark.parametrize("tau,d", [(1.5, 1), (2.0, 2), (3.3, 4), (10.0, 3)])
def test_sobolev_continuous_at_zero(tau, d):
    k = Kernel.sobolev(tau, d)
    near = sobolev_profile(tau, d, np.array([1e-7]))[0]
    assert near == pytest.approx(k.diagonal, rel=1e-5)


@pytest.mark.parametrize("nu,r,expected", [
    (0.5, 1.0, math.sqrt(math.pi / 2) * math.exp(-1)),
    (1.5, 2.0, math.sqrt(math.pi / 4) * math.exp(-2) * 1.5),
])
def test_bessel_half_integer_closed_forms(nu, r, expected):
    assert bessel_k(nu, r) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("nu", [0.1, 0.5, 0.73, 1.0, 2.5, 7.25, 20.0, 49.9])
@pytest.mark.parametrize("r", [1e-8, 1e-3, 0.5, 1.9, 2.1, 10.0, 50.0])
def test_bessel_against_mpmath(nu, r):
    mpmath.mp.dps = 40
    ref = float(mpmath.log(mpmath.besselk(nu, r)))
    assert log_bessel_k(nu, r) == pytest.approx(ref, rel=1e-10, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 30.0), st.floats(0.01, 40.0))
def test_bessel_against_scipy(nu, r):
    ref = scipy.special.kv(nu, r)
    assert bessel_k(nu, r) == pytest.approx(ref, rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(1e-3, 30.0), st.floats(1e-3, 5.0))
def test_bessel_strictly_decreasing(nu, r, dr):
    assert log_bessel_k(nu, r) > log_bessel_k(nu, r + dr)


@pytest.mark.parametrize("nu,r", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0), (math.nan, 1.0)])
def test_bessel_rejects_bad_arguments(nu, r):
    with pytest.raises(ValidationError):
        log_bessel_k(nu, r)


def test_bessel_overflow_is_signalled():
    with pytest.raises(NumericalError):
        bessel_k(50.0, 1e-8)


@pytest.mark.parametrize("tau,d", [(1.5, 1), (2.5, 1), (3.0, 2), (4.5, 3), (6.0, 4)])
def test_sobolev_half_integer_paths_agree(tau, d):
    r = np.array([1e-6, 0.01, 0.3, 1.0, 2.0, 5.0, 11.0, 30.0])
    fast = sobolev_profile(tau, d, r)
    slow = sobolev_profile(tau, d, r, force_numeric=True)
    np.testing.assert_allclose(fast, slow, rtol=1e-9)


@pytest.mark.parametrize("kernel", [Kernel.gaussian(0.7), Kernel.sobolev(2.2, 3), Kernel.sobolev(2.0, 3)])
def test_exchange_symmetry_bitwise(kernel):
    rng = np.random.default_rng(0)
    for _ in range(20):
        x, y = rng.normal(size=3), rng.normal(size=3)
        assert eval_kernel(kernel, x, y) == eval_kernel(kernel, y, x)


@pytest.mark.parametrize("kernel", [Kernel.gaussian(0.3), Kernel.gaussian(5.0), Kernel.sobolev(2.0, 2),
                                    Kernel.sobolev(3.5, 2)])
@pytest.mark.parametrize("m", [2, 10, 50])
def test_gram_positive_definite(kernel, m):
    X = np.random.default_rng(m).uniform(0, 1, (m, 2))
    K = gram(kernel, X)
    assert np.array_equal(K, K.T)
    w = np.linalg.eigvalsh(K)
    # positive up to eigensolver rounding
    assert w.min() > -m * np.finfo(float).eps * w.max()


def test_gaussian_range():
    X = np.random.default_rng(1).normal(size=(30, 4))
    K = gram(Kernel.gaussian(0.2), X)
    assert np.all(K > 0) and np.all(K <= 1) and np.all(np.diag(K) == 1)


def test_gram_matches_pointwise_and_cross():
    k = Kernel.sobolev(2.7, 2)
    X = np.random.default_rng(2).uniform(size=(6, 2))
    Y = np.random.default_rng(3).uniform(size=(4, 2))
    G = gram(k, X)
    C = cross_gram(k, X, Y)
    for i in range(6):
        for j in range(6):
            assert G[i, j] == pytest.approx(eval_kernel(k, X[i], X[j]), rel=1e-12)
        for j in range(4):
            assert C[i, j] == pytest.approx(eval_kernel(k, X[i], Y[j]), rel=1e-12)


def test_errors():
    with pytest.raises(ValidationError):
        Kernel.gaussian(0.0)
    with pytest.raises(ValidationError):
        Kernel.sobolev(1.0, 2)
    with pytest.raises(ValidationError):
        Kernel.sobolev(60.0, 2)
    with pytest.raises(DimensionMismatchError):
        eval_kernel(Kernel.gaussian(1.0), [0.0], [0.0, 1.0])
    with pytest.raises(DimensionMismatchError):
        gram(Kernel.sobolev(2.0, 2), np.zeros((3, 3)))
    with pytest.raises(ValidationError):
        eval_kernel(Kernel.gaussian(1.0), [math.inf], [0.0])
    with pytest.raises(ValidationError):
        Kernel("matern", a=1.0)


def test_config_round_trip_and_conventions():
    for k in (Kernel.gaussian(0.025), Kernel.sobolev(3.0, 2), Kernel.sobolev(3.0)):
        assert kernel_from_config(k.to_config()) == k
    assert gaussian_from_gamma(0.05, "half").a == pytest.approx(0.025)
    assert gaussian_from_gamma(2.0, "over_d", 4).a == pytest.approx(0.5)
    assert gaussian_from_gamma(0.3, "canonical").a == 0.3
    with pytest.raises(ValidationError):
        gaussian_from_gamma(1.0, "over_d")
    with pytest.raises(ValidationError):
        kernel_from_config({"family": "gaussian", "a": 1.0, "width": 2})
