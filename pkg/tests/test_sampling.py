import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import special_ortho_group

from ksl.errors import ParseError, ValidationError
from ksl.sampling import (SampleSet, fill_distance_estimate, gaussian_separation_bound, geometry_summary,
                          read_points_csv, sample_uniform, separation_prob_bound, separation_radius)

GOLDEN_SEED42 = [[0.8201981478608876, 0.18924562408645496],
                 [0.8676608148821462, 0.3945814702827203],
                 [0.36812845090913937, 0.4344462539595917]]


def naive_separation(X):
    best = math.inf
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            best = min(best, math.sqrt(sum((a - b) ** 2 for a, b in zip(X[i], X[j]))))
    return best / 2


def test_single_point_in_box():
    S = sample_uniform(1, 1, (0, 1), 5)
    assert 0 <= S.points[0, 0] <= 1


def test_golden_seed_42():
    assert sample_uniform(3, 2, (0, 1), 42).points.tolist() == GOLDEN_SEED42


def test_bit_identical_and_seed_sensitive():
    a = sample_uniform(20, 3, (-1, 1), 9).points
    assert np.array_equal(a, sample_uniform(20, 3, (-1, 1), 9).points)
    assert not np.array_equal(a, sample_uniform(20, 3, (-1, 1), 10).points)


def test_law_of_large_numbers():
    assert abs(sample_uniform(100_000, 1, (0, 1), 1).points.mean() - 0.5) < 0.005


@pytest.mark.parametrize("box", [(1, 1), (2, 0), (0, math.inf)])
def test_invalid_box(box):
    with pytest.raises(ValidationError):
        sample_uniform(3, 2, box, 0)


def test_size_guard():
    with pytest.raises(ValidationError):
        sample_uniform(10**6, 10**4, (0, 1), 0)


def test_points_outside_box_rejected():
    with pytest.raises(ValidationError):
        SampleSet(np.array([[0.5], [1.5]]), (0, 1))


def test_separation_examples():
    assert separation_radius(SampleSet(np.array([[0.0], [1.0]]))) == 0.5
    assert separation_radius(SampleSet(np.array([[0.0], [1.0], [3.0]]), (0, 3))) == 0.5
    with pytest.raises(ValidationError):
        separation_radius(SampleSet(np.array([[0.2]])))


@pytest.mark.parametrize("seed", range(5))
def test_separation_matches_naive_scan(seed):
    S = sample_uniform(25, 4, (0, 1), seed)
    assert separation_radius(S) == pytest.approx(naive_separation(S.points.tolist()), rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.floats(-5, 5))
def test_separation_rigid_motion_invariant(seed, shift):
    X = np.random.default_rng(seed).uniform(size=(15, 3))
    Q = special_ortho_group.rvs(3, random_state=seed % 1000)
    Y = X @ Q.T + shift
    q1 = separation_radius(X)
    q2 = separation_radius(Y)
    assert q2 == pytest.approx(q1, rel=1e-12)


@pytest.mark.parametrize("d", [1, 3, 10])
def test_fill_distance_single_center(d):
    S = SampleSet(np.full((1, d), 0.5))
    h = fill_distance_estimate(S, 500, 0)
    assert 0 <= h <= math.sqrt(d) / 2
    assert h <= S.diameter


def test_fill_distance_grid():
    S = SampleSet(np.array([[0.0], [0.5], [1.0]]))
    h = fill_distance_estimate(S, 10_000, 3)
    assert h == pytest.approx(0.25, abs=0.02)
    assert h <= 0.25


def test_fill_distance_high_dimension_path():
    S = sample_uniform(40, 64, (0, 1), 1)
    h1 = fill_distance_estimate(S, 200, 2)
    P = np.random.default_rng(0)
    assert h1 <= S.diameter and h1 > 0
    summary = geometry_summary(S, 200, 2)
    assert summary.fill_distance_estimate == h1
    assert summary.separation_radius <= S.diameter / 2
    assert summary.probe_count == 200
    del P


def test_fill_distance_default_probes():
    S = sample_uniform(10, 2, (0, 1), 0)
    assert geometry_summary(S).probe_count == 100


def test_separation_prob_bound_examples():
    assert separation_prob_bound(5, 3, 1.0, 0.0).value == 1.0
    b = separation_prob_bound(2, 2, 1.0, 0.1)
    assert b.value == pytest.approx(1 - 0.02 * math.pi, rel=1e-14)
    assert not b.vacuous
    v = separation_prob_bound(100, 2, 1.0, 1.0)
    assert v.value < 0 and v.vacuous
    with pytest.raises(ValidationError):
        separation_prob_bound(5, 2, 1.0, math.nan)
    with pytest.raises(ValidationError):
        separation_prob_bound(1, 2, 1.0, 0.1)


def test_gaussian_separation_bound_examples():
    b = gaussian_separation_bound(10, 5, 1.0, 1.0)
    assert b.d0 == pytest.approx(2048 * math.exp(4 * math.pi), rel=1e-14)
    assert b.d0 == pytest.approx(5.8727e8, rel=1e-4)
    assert gaussian_separation_bound(10, 100, 1.0, 2.0).q_lower == 10.0
    assert b.confidence < 0 and b.vacuous
    with pytest.raises(ValidationError):
        gaussian_separation_bound(10, 5, 0.0, 1.0)
    with pytest.raises(ValidationError):
        gaussian_separation_bound(10, 5, 1.0, -1.0)


def test_csv_round_trip_exact():
    S = sample_uniform(30, 3, (-1, 1), 4)
    y = np.random.default_rng(0).normal(size=30)
    X2, y2 = read_points_csv(S.to_csv(y))
    assert np.array_equal(X2, S.points)
    assert np.array_equal(y2, y)
    X3, none = read_points_csv(S.to_csv())
    assert none is None and np.array_equal(X3, S.points)


@pytest.mark.parametrize("text,needle", [
    ("x1,x2\na,b\n", "row 1"),
    ("x1,x2\n1,2\n3\n", "row 2"),
    ("x1,x2\n1,nan\n", "row 1 column 2"),
    ("x1,x2\n1,inf\n", "non-finite"),
    ("a,b\n1,2\n", "header"),
    ("", "empty"),
    ("x1\n", "no rows"),
])
def test_csv_errors(text, needle):
    with pytest.raises(ParseError) as info:
        read_points_csv(text)
    assert needle in str(info.value)


def test_separation_prob_bound_covers_full_minimal_distance():
    m, d = 10, 3
    q = np.array([separation_radius(sample_uniform(m, d, (0.0, 1.0), 100 + t)) for t in range(1000)])
    for t in np.linspace(0.02, 0.13, 5):
        bound = separation_prob_bound(m, d, 1.0, float(t)).value
        assert np.mean(2 * q >= t) >= bound - 0.03
