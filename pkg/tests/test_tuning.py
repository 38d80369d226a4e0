import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from markdown_pricing import tuning
from markdown_pricing.errors import ConfigurationError, ParameterError


def rho_exact(m, s, k):
    q = Fraction(s, 2)
    g = sum(q**j for j in range(m))
    return (1 + g * k) / (q**m + g * (k + 1))


def test_rho_examples():
    assert tuning.rho(1, 2, 1) == 2 / 3
    assert tuning.rho(20, 2, 1) == pytest.approx(21 / 41, abs=1e-15)
    assert tuning.rho(1, 4, 1) == 0.5


def test_rho_s2_closed_form():
    for m, k in itertools.product(range(1, 30), range(1, 6)):
        assert tuning.rho(m, 2, k) == pytest.approx((m * k + 1) / (m * (k + 1) + 1), abs=1e-15)


def test_rho_matches_exact_rational():
    for m, s, k in itertools.product(range(1, 11), (2, 3, 4), range(1, 6)):
        assert tuning.rho(m, s, k) == pytest.approx(float(rho_exact(m, s, k)), rel=1e-14)


def test_rho_decreasing_in_m_and_bounded_below():
    for k in range(1, 6):
        vals = [tuning.rho(m, 2, k) for m in range(1, 60)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert min(vals) > k / (k + 1)


def test_rho_rejects_bad_arguments():
    for args in [(0, 2, 1), (1, 1, 1), (1, 2, 0), (1.5, 2, 1)]:
        with pytest.raises(ParameterError):
            tuning.rho(*args)


def test_lp_residuals_and_telescoping():
    worst = 0.0
    for m, s, k in itertools.product(range(1, 11), (2, 3, 4), range(1, 6)):
        worst = max(worst, np.max(np.abs(tuning.lp_residuals(m, s, k))))
        assert abs(tuning.telescoping_residual(m, s, k)) <= 1e-12
    assert worst <= 1e-12


def test_lp_exponent_invariants():
    for m, s, k in itertools.product(range(1, 11), (2, 3, 4), range(1, 6)):
        x, y, z = tuning.lp_exponents(m, s, k)
        assert 0 < x < 1 and y > 0
        assert np.all(np.diff(z) > 0) and z[-1] < 1


def test_lp_residual_detects_perturbation():
    x, y, z = tuning.lp_exponents(3, 2, 1)
    assert np.max(np.abs(tuning.lp_residuals(3, 2, 1, x, y + 1e-6, z))) > 1e-7


def test_s2_exponents_match_stated_schedule():
    # n_j exponents (mk + j) / (m(k+1) + 1) for s = 2
    for m, k in itertools.product(range(1, 8), range(1, 4)):
        _, _, z = tuning.lp_exponents(m, 2, k)
        expected = [(m * k + j) / (m * (k + 1) + 1) for j in range(1, m + 1)]
        np.testing.assert_allclose(z, expected, atol=1e-12)


def test_solve_lp_n1e6_k1_m1():
    t = tuning.solve_lp(10**6, 1, 2, 1)
    assert t.rho == 2 / 3
    assert t.n_schedule == (10_000,)
    # h = n^-y with y = (1 - x) / s = 1/6 satisfies every tight constraint
    assert t.h == pytest.approx(0.1, rel=1e-12)
    assert t.theorem_form_h() == pytest.approx(0.01, rel=1e-12)
    x, y, z = tuning.lp_exponents(1, 2, 1)
    assert np.max(np.abs(tuning.lp_residuals(1, 2, 1, x, 1 / 3, z))) > 0.1


def test_solve_lp_reduces_m_until_feasible():
    t = tuning.solve_lp(10**4, 2, 2, 6)
    assert t.requested_m == 6
    assert t.m < 6
    assert t.exploration_rounds <= 10**4
    bigger = tuning.schedule_for(10**4, 2, 2, t.m + 1)
    assert bigger.exploration_rounds > 10**4


def test_solve_lp_infeasible():
    with pytest.raises(ConfigurationError):
        tuning.solve_lp(100, 5, 2, 1)


@settings(max_examples=200, deadline=None)
@given(st.integers(10**3, 10**7), st.integers(1, 3), st.integers(2, 4), st.integers(1, 8))
def test_solve_lp_schedule_invariants(n, k, s, m):
    try:
        t = tuning.solve_lp(n, k, s, m)
    except ConfigurationError:
        return
    assert 0 < t.h < 1 and 0 < t.rho < 1
    assert all(a < b for a, b in zip(t.n_schedule, t.n_schedule[1:]))
    assert (k + 1) * sum(t.n_schedule) <= n
    assert 1 <= t.m <= m
