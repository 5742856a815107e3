import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plap.errors import DomainError, NoRealRoot
from plap.indicial import (IndicialData, Nonlinearity, ProblemParams,
                           RootPlacement, auxiliary_f, critical_exponent,
                           eigen_rate_alpha, gamma_star, hardy_best_constant,
                           indicial_roots, placement_satisfied)


@st.composite
def admissible_params(draw):
    n = draw(st.integers(2, 8))
    p = draw(st.floats(1.05, min(n - 0.05, 4.0)))
    a = draw(st.floats(-2.0, 2.0))
    return n, p, a


class TestHardyBestConstant:
    def test_hand_values(self):
        assert hardy_best_constant(3, 2, 0) == pytest.approx(0.25, abs=1e-15)
        assert hardy_best_constant(5, 2, -1) == pytest.approx(6.25, abs=1e-15)

    def test_vanishes_at_critical_weight(self):
        assert hardy_best_constant(4, 2, 1) == 0.0

    def test_domain_error(self):
        with pytest.raises(DomainError):
            hardy_best_constant(3, 5, 0)
        with pytest.raises(DomainError):
            hardy_best_constant(3, 1.0, 0)


class TestEigenRateAlpha:
    def test_hand_values(self):
        assert eigen_rate_alpha(1, 2) == 1.0
        assert eigen_rate_alpha(2, 3) == 1.0
        assert eigen_rate_alpha(1, 1.5) == pytest.approx(2 ** (2 / 3), abs=1e-14)

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(DomainError):
            eigen_rate_alpha(0.0, 2)
        with pytest.raises(DomainError):
            eigen_rate_alpha(-1.0, 2)


class TestAuxiliaryF:
    def test_peak_value_n4(self):
        # peak at 1 with value 1 for (n=4, p=2, a=0)
        assert gamma_star(4, 2, 0) == 1.0
        assert auxiliary_f(1.0, 4, 2, 0) == pytest.approx(1.0, abs=1e-15)

    def test_zero_by_continuity(self):
        for p in (1.5, 2.0, 3.0):
            assert auxiliary_f(0.0, 5, p, 0.3) == 0.0

    def test_second_factor_root(self):
        assert auxiliary_f(3.0, 5, 2, 0) == 0.0

    @given(admissible_params())
    @settings(max_examples=150, deadline=None)
    def test_peak_location_and_value(self, npa):
        n, p, a = npa
        gs = gamma_star(n, p, a)
        mu_bar = hardy_best_constant(n, p, a)
        span = max(1.0, abs(gs))
        grid = np.linspace(gs - 3 * span, gs + 3 * span, 2001)
        vals = np.array([auxiliary_f(g, n, p, a) for g in grid])
        assert abs(auxiliary_f(gs, n, p, a) - mu_bar) <= 1e-10 * max(1.0, mu_bar)
        assert vals.max() <= mu_bar + 1e-10 * max(1.0, mu_bar)
        # the grid argmax sits next to the true peak
        assert abs(grid[np.argmax(vals)] - gs) <= grid[1] - grid[0] + 1e-12

    @given(admissible_params())
    @settings(max_examples=100, deadline=None)
    def test_monotone_branches(self, npa):
        n, p, a = npa
        gs = gamma_star(n, p, a)
        span = max(1.0, abs(gs))
        left = np.linspace(gs - 4 * span, gs, 400)
        right = np.linspace(gs, gs + 4 * span, 400)
        f_left = [auxiliary_f(g, n, p, a) for g in left]
        f_right = [auxiliary_f(g, n, p, a) for g in right]
        assert all(x < y + 1e-13 for x, y in zip(f_left, f_left[1:]))
        assert all(x > y - 1e-13 for x, y in zip(f_right, f_right[1:]))


class TestIndicialRoots:
    def test_mu_zero_factorization(self):
        data = indicial_roots(ProblemParams(n=4, p=2.0))
        assert data.gamma1 == 0.0
        assert data.gamma2 == 2.0
        assert data.placement is RootPlacement.BELOW_CRITICAL_NONNEG_MU
        assert not data.double_root

    def test_double_root(self):
        data = indicial_roots(ProblemParams(n=3, p=2.0, mu=0.25))
        assert data.double_root
        assert data.gamma1 == data.gamma2 == pytest.approx(0.5, abs=1e-14)

    def test_quadratic_case(self):
        # independent oracle: gamma(2 - gamma) = 0.75 has roots 1/2 and 3/2
        data = indicial_roots(ProblemParams(n=4, p=2.0, mu=0.75))
        q1, q2 = np.sort(np.roots([-1.0, 2.0, -0.75]))
        assert data.gamma1 == pytest.approx(q1, abs=1e-12)
        assert data.gamma2 == pytest.approx(q2, abs=1e-12)

    def test_no_real_root(self):
        with pytest.raises(NoRealRoot):
            indicial_roots(ProblemParams(n=3, p=2.0, mu=1.0))

    def test_critical_weight_positive_mu_has_no_root(self):
        # mu_bar = 0 at a = (n-p)/p, so any mu > 0 is inadmissible
        with pytest.raises(NoRealRoot):
            indicial_roots(ProblemParams(n=4, p=2.0, a=1.0, mu=0.5))

    def test_critical_weight_negative_mu(self):
        p = 2.0
        data = indicial_roots(ProblemParams(n=4, p=p, a=1.0, mu=-3.0))
        mag = (3.0 / (p - 1.0)) ** (1.0 / p)
        assert data.gamma1 == pytest.approx(-mag, rel=1e-13)
        assert data.gamma2 == pytest.approx(mag, rel=1e-13)
        assert data.placement is RootPlacement.AT_CRITICAL

    @given(admissible_params(), st.floats(0.0, 1.0), st.booleans())
    @settings(max_examples=300, deadline=None)
    def test_random_roots_residual_and_placement(self, npa, frac, negative):
        n, p, a = npa
        mu_bar = hardy_best_constant(n, p, a)
        mu = -10.0 * frac if negative else frac * mu_bar
        data = indicial_roots(ProblemParams(n=n, p=p, a=a, mu=mu))
        tol = 1e-12 * max(1.0, abs(mu))
        if data.double_root:
            tol = 1.1e-10 * max(1.0, mu_bar)
        assert abs(auxiliary_f(data.gamma1, n, p, a) - mu) <= tol
        assert abs(auxiliary_f(data.gamma2, n, p, a) - mu) <= tol
        assert data.gamma1 <= data.gamma_star + 1e-12 <= data.gamma2 + 2e-12
        assert placement_satisfied(data, n, p, a)

    @given(st.integers(3, 8), st.floats(-2.0, 2.0), st.floats(0.0, 1.0),
           st.booleans())
    @settings(max_examples=200, deadline=None)
    def test_p2_matches_quadratic_formula(self, n, a, frac, negative):
        mu_bar = hardy_best_constant(n, 2.0, a)
        mu = -10.0 * frac if negative else 0.999 * frac * mu_bar
        data = indicial_roots(ProblemParams(n=n, p=2.0, a=a, mu=mu))
        if data.double_root:
            return  # collapsed bracket; the oracle comparison needs two roots
        d = n - (a + 1.0) * 2.0
        disc = math.sqrt(max(d * d - 4.0 * mu, 0.0))
        assert data.gamma1 == pytest.approx(0.5 * (d - disc), abs=1e-12 * max(1, abs(d)))
        assert data.gamma2 == pytest.approx(0.5 * (d + disc), abs=1e-12 * max(1, abs(d)))


class TestCriticalExponent:
    def test_hand_values(self):
        assert critical_exponent(3, 2, 0, 0) == pytest.approx(6.0, abs=1e-14)
        assert critical_exponent(4, 2, 0, 0) == pytest.approx(4.0, abs=1e-14)
        assert critical_exponent(5, 2, 0.5, 0.5) == pytest.approx(10 / 3, abs=1e-14)

    def test_range(self):
        val = critical_exponent(5, 2, 0.3, 0.9)
        assert 2.0 < val <= 5 * 2 / (5 - 2)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            critical_exponent(4, 2, 0, 1.0)  # b = a+1 excluded
        with pytest.raises(DomainError):
            critical_exponent(4, 2, 1.0, 1.0)  # a at the critical weight
        with pytest.raises(DomainError):
            critical_exponent(4, 2, 0.5, 0.2)  # b < a


class TestProblemParams:
    def test_rejects_bad_p(self):
        with pytest.raises(DomainError):
            ProblemParams(n=3, p=5.0)
        with pytest.raises(DomainError):
            ProblemParams(n=3, p=1.0)

    def test_rejects_small_n(self):
        with pytest.raises(DomainError):
            ProblemParams(n=1, p=0.5)

    def test_rejects_negative_lambda(self):
        with pytest.raises(DomainError):
            ProblemParams(n=3, p=2.0, lam=-1.0)

    def test_nonlinearity_window(self):
        ProblemParams(n=3, p=2.0, nonlinearity=Nonlinearity(q=4.0))
        with pytest.raises(DomainError):
            ProblemParams(n=3, p=2.0, nonlinearity=Nonlinearity(q=6.5))
        with pytest.raises(DomainError):
            ProblemParams(n=3, p=2.0, nonlinearity=Nonlinearity(q=1.5))

    def test_derived_quantities(self):
        params = ProblemParams(n=4, p=2.0)
        assert params.sobolev_critical == 4.0
        assert params.weight_critical == 1.0
