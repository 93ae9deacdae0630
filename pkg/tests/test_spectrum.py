import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from ksl.errors import ValidationError
from ksl.kernels import Kernel, gram
from ksl.linalg import eigen_sym
from ksl.sampling import sample_uniform, separation_radius
from oracles import certified_log_min_eig
from ksl.spectrum import (CALIBRATION_SAFETY, DEFAULT_LAMBDA_GRID, EXP_DECAY_C2, MULTI_LOG_C1, DecaySpec,
                          SpectralProfile, a_d_lambda, a_d_lambda_decay_shape, b_m_lambda,
                          calibrate_multi_log_constant, certified_bounds, clean_eigenvalues,
                          effective_dimension_empirical, effective_dimension_proxy,
                          effective_dimension_theoretical, min_eig_lower_bound, multi_log_integral,
                          multi_log_integral_check, spectral_profile)

# reference-run values, frozen
MULTI_LOG_RATIO_D2 = 0.21332677773240516
FROZEN_C1 = 2.7052070160158763


def test_effective_dimension_examples():
    assert effective_dimension_empirical([3.0, 2.0, 1.0], 3, 1e-14) == pytest.approx(3.0, rel=1e-12)
    assert effective_dimension_empirical([1.0], 1, 1.0) == 0.5
    assert effective_dimension_empirical([2.0, 1.0], 2, 0.5) == pytest.approx(7 / 6, rel=1e-15)
    with pytest.raises(ValidationError):
        effective_dimension_empirical([1.0], 1, 0.0)


def test_a_d_lambda_examples():
    assert a_d_lambda([1.0], 1, 1.0) == pytest.approx(2.0)
    assert a_d_lambda([0.0] * 4, 4, 1.0) == pytest.approx(0.75)
    w = [5.0, 1.0, 0.01]
    assert a_d_lambda(w, 3, 1.0) < a_d_lambda(w, 3, 0.01)
    with pytest.raises(ValidationError):
        a_d_lambda(w, 3, -1.0)


def test_vectorized_lambda_matches_scalar():
    w = np.array([4.0, 2.0, 0.5, 1e-3])
    grid = np.array([1e-4, 1e-2, 1.0])
    np.testing.assert_allclose(a_d_lambda(w, 4, grid), [a_d_lambda(w, 4, g) for g in grid], rtol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=8), st.integers(0, 7), st.floats(0, 5),
       st.floats(1e-4, 10))
def test_a_d_lambda_nondecreasing_in_each_eigenvalue(w, idx, bump, lam):
    w = np.array(w)
    i = idx % w.size
    w2 = w.copy()
    w2[i] += bump
    assert a_d_lambda(w2, w.size, lam) >= a_d_lambda(w, w.size, lam) * (1 - 1e-15)


def test_two_path_effective_dimension():
    rng = np.random.default_rng(0)
    for _ in range(100):
        m = int(rng.integers(1, 21))
        X = rng.uniform(size=(m, 3))
        K = gram(Kernel.gaussian(float(rng.uniform(0.5, 5))), X)
        lam = 10 ** rng.uniform(-6, 0)
        direct = np.trace(np.linalg.solve(lam * m * np.eye(m) + K, K))
        w = eigen_sym(K).eigenvalues
        assert effective_dimension_empirical(w, m, lam) == pytest.approx(direct, rel=1e-9)


def test_profile_invariants_and_json():
    X = sample_uniform(40, 3, (0, 1), 0).points
    w = eigen_sym(gram(Kernel.gaussian(2.0), X)).eigenvalues
    p = spectral_profile(w)
    assert np.all(np.diff(p.eigenvalues) <= 0)
    assert np.all((p.n_d > 0) & (p.n_d <= p.m))
    assert np.all(np.diff(p.n_d) < 0)
    assert np.all(np.diff(p.a_d) <= 0)
    assert p.lambda_grid.size == 40 and p.lambda_grid[0] == 1e-8 and p.lambda_grid[-1] == pytest.approx(10)
    q = SpectralProfile.from_dict(p.to_dict())
    np.testing.assert_array_equal(q.a_d, p.a_d)
    assert q.min_eig == p.min_eig and q.cond == p.cond
    assert set(p.to_dict()) == {"eigenvalues", "m", "lambda_grid", "n_d", "a_d", "cond", "min_eig"}


def test_clean_eigenvalues():
    np.testing.assert_array_equal(clean_eigenvalues([1.0, -1e-12, 0.5]), [1.0, 0.5, 0.0])
    with pytest.raises(ValidationError):
        clean_eigenvalues([1.0, -0.1])


def test_algebraic_decay():
    assert effective_dimension_theoretical(DecaySpec.algebraic(2.0), 1.0) == pytest.approx(math.pi / 2)
    spec = DecaySpec.algebraic(3.0, 2.0)
    ratio = effective_dimension_theoretical(spec, 0.01 / 16) / effective_dimension_theoretical(spec, 0.01)
    assert ratio == pytest.approx(16 ** (1 / 3))
    val, _ = quad(lambda t: 1 / (1 + (0.3 / 2.0) * t ** 3), 0, math.inf)
    assert effective_dimension_theoretical(spec, 0.3) == pytest.approx(val, rel=1e-8)
    with pytest.raises(ValidationError):
        DecaySpec.algebraic(1.0)


def test_exponential_decay():
    lam = math.exp(-5)
    assert effective_dimension_theoretical(DecaySpec.exponential(1.0, 1), lam) == pytest.approx(EXP_DECAY_C2 * 5)
    val, _ = quad(lambda t: math.exp(-t) / (math.exp(-t) + lam), 0, math.inf)
    assert effective_dimension_theoretical(DecaySpec.exponential(1.0, 1), lam) >= val
    with pytest.raises(ValidationError):
        effective_dimension_theoretical(DecaySpec.exponential(1.0, 1), 2.0)
    with pytest.raises(ValidationError):
        DecaySpec.exponential(0.0, 1)


def test_decay_shape_positive_and_decreasing_in_m():
    spec = DecaySpec.algebraic(2.0)
    assert a_d_lambda_decay_shape(spec, 1000, 0.01, 0.1) < a_d_lambda_decay_shape(spec, 100, 0.01, 0.1)


def test_b_m_lambda_examples():
    assert b_m_lambda(1, 1.0, 1.0, 0.0) == 2.0
    assert b_m_lambda(4, 1.0, 1.0, 1.0) == pytest.approx(1.5)
    assert b_m_lambda(100, 1.0, 1.0, 0.0) / b_m_lambda(400, 1.0, 1.0, 0.0) == pytest.approx(4.0)
    assert b_m_lambda(100, 1.0, 1.0, 1e12) / b_m_lambda(400, 1.0, 1.0, 1e12) == pytest.approx(2.0, rel=1e-6)
    with pytest.raises(ValidationError):
        b_m_lambda(0, 1.0, 1.0, 0.0)


def test_certified_bounds():
    # log(8/delta) = 1 would need delta = 8/e, outside (0, 1); check the formula at delta = 0.5
    cb = certified_bounds(0.0, 1.0, 0.5, 1.0, 1.0, 1.0)
    assert cb.Q_bound == pytest.approx(math.sqrt(2) * math.log(16) ** 2)
    assert cb.W_bound == cb.P_bound == cb.U_bound == 0.0
    with pytest.raises(ValidationError):
        certified_bounds(0.0, 1.0, 8 / math.e, 1.0, 1.0, 1.0)
    a, b = certified_bounds(2.0, 0.3, 0.1, 1.5, 2.0, 1.0), certified_bounds(4.0, 0.3, 0.1, 1.5, 2.0, 1.0)
    for name in ("W_bound", "P_bound", "U_bound"):
        assert getattr(b, name) == pytest.approx(2 * getattr(a, name))
    c = 1.5 * 9.5
    assert b.Q_bound - a.Q_bound == pytest.approx(math.sqrt(2) * 2 * c * 2 * math.log(80) ** 2)
    d0 = 0.1
    h = certified_bounds(2.0, 0.3, d0 / 2, 1.5, 2.0, 1.0)
    factor = (math.log(16 / d0) / math.log(8 / d0)) ** 2
    assert h.P_bound == pytest.approx(a.P_bound * factor)
    with pytest.raises(ValidationError):
        certified_bounds(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)


def test_min_eig_gaussian_log_space_identity():
    u = 12.76
    expected = math.exp(2 * math.log(u) - u) / (32 * math.gamma(2))
    assert min_eig_lower_bound(Kernel.gaussian(1.0), 1.0, 2) == pytest.approx(expected, rel=1e-13)


def test_min_eig_bound_no_underflow_in_log_space():
    assert min_eig_lower_bound(Kernel.gaussian(0.025), 1.5, 500) >= 0.0
    with pytest.raises(ValidationError):
        min_eig_lower_bound(Kernel.gaussian(1.0), 0.0, 2)


@pytest.mark.parametrize("tau,d", [(1.5, 2), (2.0, 3), (3.5, 1)])
def test_min_eig_sobolev_monotone_in_q(tau, d):
    qs = np.linspace(0.01, 1.0, 200)
    vals = [min_eig_lower_bound(Kernel.sobolev(tau, d), q, d) for q in qs]
    assert np.all(np.diff(vals) > 0)


@pytest.mark.parametrize("family", ["gaussian", "sobolev"])
def test_min_eig_bound_holds_random_sets(family):
    rng = np.random.default_rng(7 if family == "gaussian" else 8)
    for _ in range(10):
        m, d = int(rng.integers(2, 16)), int(rng.integers(1, 4))
        k = Kernel.gaussian(float(rng.uniform(1, 10))) if family == "gaussian" else Kernel.sobolev(d / 2 + 1.0, d)
        X = rng.uniform(size=(m, d))
        log_bound = min_eig_lower_bound(k, separation_radius(X), d, log=True)
        assert certified_log_min_eig(k, X) - math.log(m) >= log_bound


def test_min_eig_log_flag_consistent():
    k = Kernel.gaussian(2.0)
    assert math.exp(min_eig_lower_bound(k, 0.3, 2, log=True)) == pytest.approx(min_eig_lower_bound(k, 0.3, 2))
    assert min_eig_lower_bound(k, 0.3, 2, squared_exponent=True) < min_eig_lower_bound(k, 0.3, 2)


def test_multi_log_d1_closed_form_and_scaling():
    for alpha in (0.5, 1.0, 3.0):
        for lam in (1e-6, 0.01, 0.3, 0.9):
            closed = math.log(1 + 1 / lam) / alpha
            assert multi_log_integral(alpha, 1, lam) == pytest.approx(closed, rel=1e-9)
    assert multi_log_integral(2.0, 1, 0.1) == pytest.approx(multi_log_integral(1.0, 1, 0.1) / 2, rel=1e-12)


def test_multi_log_regression_and_range():
    c = multi_log_integral_check(1.0, 2, 0.01)
    assert c.holds
    assert c.ratio == pytest.approx(MULTI_LOG_RATIO_D2, rel=1e-8)
    for lam in (0.0, 1.0, 1.5):
        with pytest.raises(ValidationError):
            multi_log_integral(1.0, 2, lam)


def test_calibration_reproduces_frozen_constant():
    assert MULTI_LOG_C1 == FROZEN_C1
    assert calibrate_multi_log_constant() == pytest.approx(FROZEN_C1, rel=1e-8)
    assert CALIBRATION_SAFETY == 1.25


def test_effective_dimension_sandwich():
    k = Kernel.gaussian(0.5)
    m, d, lam, delta = 100, 20, 0.1, 0.1
    n_bar = effective_dimension_proxy(k, d, lam, size=2000, seed=99)
    rhs = 17 * (1 + 1 / (m * lam)) * math.sqrt(max(n_bar, 1)) * math.log(4 / delta) ** 2
    ok = 0
    for t in range(500):
        X = sample_uniform(m, d, (0, 1), t).points
        w = eigen_sym(gram(k, X)).eigenvalues
        ok += math.sqrt(max(effective_dimension_empirical(w, m, lam), 1)) <= rhs
    assert ok / 500 >= 1 - delta


def test_default_grid():
    assert len(DEFAULT_LAMBDA_GRID) == 40
    assert DEFAULT_LAMBDA_GRID == tuple(sorted(DEFAULT_LAMBDA_GRID))
