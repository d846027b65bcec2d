import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rp_quantizer.core import (
    CharacteristicFunctional,
    ComplexityGuardError,
    MassError,
    TestFunction,
    build_covariance,
    build_geometry,
    eval_S,
    verify_C1,
    verify_C3,
    wick_moment,
)
from rp_quantizer.core.gaussian import (
    bivariate_moment,
    boundary_drift,
    degenerate_geometry,
    hafnian,
    kernel_rows,
    pairing_count,
    perfect_pairings,
    time_shift_drift,
)
from rp_quantizer.core.lattice import random_test_function, spacetime_norm

OMEGA = 0.9624236501192069  # arccosh(3/2)


def test_degenerate_kernel():
    cov = build_covariance(degenerate_geometry(), 1.0)
    np.testing.assert_allclose(cov.kernel, [[1.0]])
    f = TestFunction.delta(cov.geometry, (0,), 2.0)
    assert eval_S(CharacteristicFunctional(cov), f) == pytest.approx(math.exp(-2))


def test_zero_function_gives_one():
    cov = build_covariance(build_geometry(2, [3]), 1.0)
    assert eval_S(CharacteristicFunctional(cov), TestFunction.zeros(cov.geometry)) == 1.0


@pytest.mark.parametrize("mass", [0.0, -1.0, float("nan")])
def test_invalid_mass(mass):
    with pytest.raises(MassError):
        build_covariance(build_geometry(1), mass)


def test_whole_line_kernel_closed_form():
    cov = build_covariance(build_geometry(3, [], "infinite"), 1.0)
    for a, b in [(0, 0), (0, 1), (-2, 3), (1, -1)]:
        expected = math.exp(-OMEGA * abs(a - b)) / (2 * math.sinh(OMEGA))
        assert cov.entry((a,), (b,)) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("boundary", ["dirichlet", "periodic", "infinite"])
def test_kernel_symmetric_positive(boundary):
    cov = build_covariance(build_geometry(2, [3], boundary), 0.7)
    np.testing.assert_allclose(cov.kernel, cov.kernel.T)
    assert np.linalg.eigvalsh(cov.kernel).min() > 0


def test_wick_examples():
    cov = build_covariance(build_geometry(1, [2]), 1.0)
    f = TestFunction.delta(cov.geometry, (0, 1))
    sigma2 = cov.pair(f, f)
    assert wick_moment(cov, []) == 1.0
    assert wick_moment(cov, [f]) == 0.0
    assert wick_moment(cov, [f, f]) == pytest.approx(sigma2)
    assert wick_moment(cov, [f] * 4) == pytest.approx(3 * sigma2**2)
    with pytest.raises(ComplexityGuardError):
        wick_moment(cov, [f] * 14)
    with pytest.raises(ComplexityGuardError):
        wick_moment(cov, [f] * 8, cap=6)
    assert wick_moment(cov, [f] * 8, cap=None) == pytest.approx(105 * sigma2**4)


@pytest.mark.parametrize("n,count", [(0, 1), (2, 1), (4, 3), (6, 15), (8, 105), (5, 0)])
def test_pairing_count(n, count):
    assert pairing_count(n) == count
    if n % 2 == 0:
        assert len(list(perfect_pairings(list(range(n))))) == count


def test_hafnian_matches_pairings(rng):
    a = rng.standard_normal((6, 6))
    a = a + a.T
    brute = sum(math.prod(a[i, j] for i, j in p) for p in perfect_pairings(list(range(6))))
    assert hafnian(a) == pytest.approx(brute)


@settings(max_examples=30, deadline=None)
@given(st.permutations(range(4)), st.integers(0, 2**32 - 1))
def test_wick_symmetric_under_permutation(order, seed):
    cov = build_covariance(build_geometry(1, [2]), 1.0)
    rng = np.random.default_rng(seed)
    fs = [random_test_function(cov.geometry, rng) for _ in range(4)]
    assert wick_moment(cov, [fs[i] for i in order]) == pytest.approx(wick_moment(cov, fs), abs=1e-12)


def test_C1_exact_on_periodic_time(rng):
    S = CharacteristicFunctional(build_covariance(build_geometry(2, [3], "periodic"), 1.0))
    report = verify_C1(S, 5, rng)
    assert report.time_shift_exact
    assert report.max_spatial_deviation < 1e-12
    assert report.max_time_deviation < 1e-12
    assert report.max_reflection_deviation < 1e-12


def test_C1_dirichlet_reports_drift(rng):
    S = CharacteristicFunctional(build_covariance(build_geometry(2, [3], "dirichlet"), 1.0))
    report = verify_C1(S, 5, rng)
    assert not report.time_shift_exact
    assert report.max_spatial_deviation < 1e-12
    assert report.max_reflection_deviation < 1e-12


def test_boundary_drift_decreases_with_extent():
    drifts = [boundary_drift(build_geometry(T, [2]), 1.0) for T in (2, 4, 6)]
    assert drifts[0] > drifts[1] > drifts[2] > 0


def test_C3_growth(rng):
    cov = build_covariance(build_geometry(2, [3]), 1.0)
    samples = [random_test_function(cov.geometry, rng) for _ in range(10)]
    m_fit, report = verify_C3(CharacteristicFunctional(cov), 1, samples)
    assert 0 < m_fit < 1
    assert report.bounded_by_one
    for f in samples:
        assert cov.pair(f, f) <= m_fit * spacetime_norm(f, 1) ** 2 + 1e-12


@pytest.mark.parametrize("p,q,expected", [
    (4, 0, 3 * 2.0**2),
    (0, 6, 15 * 0.5**3),
    (2, 2, 2.0 * 0.5 + 2 * 0.3**2),
    (3, 1, 3 * 2.0 * 0.3),
    (3, 2, 0.0),
])
def test_bivariate_moment_small_orders(p, q, expected):
    assert bivariate_moment(2.0, 0.5, 0.3, p, q) == pytest.approx(expected)


@settings(max_examples=20, deadline=None)
@given(p=st.integers(0, 5), q=st.integers(0, 5), seed=st.integers(0, 2**16))
def test_wick_matches_closed_form_on_repeated_arguments(p, q, seed):
    cov = build_covariance(build_geometry(1, [2]), 1.0)
    rng = np.random.default_rng(seed)
    f, g = random_test_function(cov.geometry, rng), random_test_function(cov.geometry, rng)
    expected = bivariate_moment(cov.pair(f, f), cov.pair(g, g), cov.pair(f, g), p, q)
    assert wick_moment(cov, [f] * p + [g] * q, cap=None) == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_kernel_rows_are_row_major():
    cov = build_covariance(build_geometry(1, [2]), 1.0)
    rows = kernel_rows(cov)
    assert len(rows) == cov.geometry.n_sites**2
    assert [(r["row"], r["col"]) for r in rows[:3]] == [(0, 0), (0, 1), (0, 2)]
    assert rows[0]["row_site"] == "-1 0" and rows[1]["col_site"] == "-1 1"
    assert rows[7]["value"] == cov.kernel[1, 1]


def test_time_shift_drift_vanishes_on_periodic_time(rng):
    S = CharacteristicFunctional(build_covariance(build_geometry(2, [3], "periodic"), 1.0))
    f = random_test_function(S.covariance.geometry, rng)
    assert time_shift_drift(S, f, 1) < 1e-12
    assert time_shift_drift(S, f, -1) < 1e-12
