from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from mpmath import mp, mpf

from bsflow.errors import DomainError, NumericError
from bsflow.kernel import (
    KernelQuery,
    Quadrature,
    asymptotic_root,
    center_shift,
    hermitian_kernel,
    kernel,
    kernel_log_tau_derivative,
    kernel_mass,
    kernel_tau_derivative,
    semigroup_compose,
    stationarity_roots,
    transition_cdf,
)
from bsflow.market import MarketParams

HERM = MarketParams(0.02, 0.2)


def mp_kernel(r, sigma, d, tau):
    mp.dps = 40
    r, sigma, d, tau = (mpf(str(v)) for v in (r, sigma, d, tau))
    z = d + tau * (r - sigma**2 / 2)
    return mp.exp(-r * tau) / mp.sqrt(2 * mp.pi * tau * sigma**2) * mp.exp(-z * z / (2 * tau * sigma**2))


@st.composite
def markets(draw):
    sigma = draw(st.floats(0.05, 0.8))
    r = draw(st.floats(-0.5 * sigma**2, 0.2))
    return MarketParams(r, sigma)


class TestKernelValues:
    def test_hermitian_case_at_coincidence(self):
        assert kernel(HERM, 0.3, 0.3, 1.0) == pytest.approx(1.95521346987728, rel=1e-13)

    def test_hermitian_kernel_offset(self):
        # e^{-0.02} (0.08 pi)^{-1/2} e^{-0.09/0.08}
        assert hermitian_kernel(HERM, 0.3, 0.0, 1.0) == pytest.approx(0.634764877207939, rel=1e-13)

    @pytest.mark.parametrize("r,sigma,d,tau", [(0.05, 0.2, 0.3, 1.0), (-0.1, 0.5, -1.2, 3.0), (0.2, 0.05, 0.01, 0.01)])
    def test_against_high_precision(self, r, sigma, d, tau):
        assert kernel(MarketParams(r, sigma), d, 0.0, tau) == pytest.approx(float(mp_kernel(r, sigma, d, tau)), rel=1e-12)

    def test_vectorised(self):
        x = np.linspace(-1, 1, 7)
        out = kernel(MarketParams(0.05, 0.2), x, 0.1, 0.5)
        assert out.shape == (7,)
        assert out[3] == kernel(MarketParams(0.05, 0.2), 0.0, 0.1, 0.5)

    def test_shift_identity_example(self):
        p = MarketParams(0.05, 0.2)
        tau = 0.5
        lhs = kernel(p, 0.0, 0.1, tau)
        rhs = hermitian_kernel(p, 0.0 + tau * (p.r - 0.5 * p.sigma**2), 0.1, tau)
        assert lhs == pytest.approx(rhs, rel=1e-14)

    @given(markets(), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 10))
    def test_shift_identity(self, p, x, xp, tau):
        lhs = kernel(p, x, xp, tau)
        rhs = hermitian_kernel(p, x + tau * (p.r - 0.5 * p.sigma**2), xp, tau)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-300)

    @given(st.floats(0.05, 0.8), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 10))
    def test_hermitian_collapse(self, sigma, x, xp, tau):
        p = MarketParams(0.5 * sigma**2, sigma)
        assert kernel(p, x, xp, tau) == hermitian_kernel(p, x, xp, tau)

    def test_asymmetric_unless_hermitian(self):
        p = MarketParams(0.05, 0.2)
        assert kernel(p, 0.3, 0.0, 1.0) != pytest.approx(kernel(p, -0.3, 0.0, 1.0), rel=1e-6)
        assert kernel(HERM, 0.3, 0.0, 1.0) == pytest.approx(kernel(HERM, -0.3, 0.0, 1.0), rel=1e-14)

    @pytest.mark.parametrize("tau", [0.0, -1.0])
    def test_tau_rejected(self, tau):
        with pytest.raises(DomainError):
            kernel(HERM, 0.0, 0.0, tau)

    def test_sigma_rejected(self):
        with pytest.raises(DomainError):
            kernel(MarketParams(0.0, 0.0), 0.0, 0.0, 1.0)

    def test_query_validation(self):
        KernelQuery(0.0, 0.0, 1.0)
        with pytest.raises(DomainError):
            KernelQuery(0.0, 0.0, 0.0)
        with pytest.raises(DomainError):
            KernelQuery(float("inf"), 0.0, 1.0)


class TestCenterShift:
    def test_values(self):
        assert center_shift(MarketParams(0.0, 0.2), 2.0) == pytest.approx(0.04)
        assert center_shift(HERM, 5.0) == 0.0
        assert center_shift(MarketParams(0.1, 0.2), 0.0) == 0.0

    def test_argmax_on_fine_grid(self):
        p = MarketParams(-0.01, 0.3)
        x = np.linspace(-2, 2, 40001)
        for tau in (0.5, 2.0, 6.0):
            xm = x[np.argmax(kernel(p, x, 0.2, tau))]
            assert abs(xm - (0.2 + center_shift(p, tau))) <= x[1] - x[0]

    def test_hermitian_argmax_at_source(self):
        x = np.linspace(-2, 2, 40001)
        assert x[np.argmax(hermitian_kernel(MarketParams(0.1, 0.3), x, 0.25, 3.0))] == pytest.approx(0.25, abs=1e-4)


class TestMass:
    def test_zero_rate(self):
        assert kernel_mass(MarketParams(0.0, 0.3), 0.0, 1.7) == pytest.approx(1.0, abs=1e-8)

    def test_discounted(self):
        assert abs(kernel_mass(MarketParams(0.05, 0.2), 0.0, 2.0) - 0.904837418035960) < 1e-8

    def test_negative_rate(self):
        assert abs(kernel_mass(MarketParams(-0.02, 0.2), 0.0, 1.0) - 1.020201340026756) < 1e-8

    @given(markets(), st.floats(0.01, 10), st.floats(-1, 1))
    def test_mass_law(self, p, tau, xp):
        assert abs(kernel_mass(p, xp, tau) - math.exp(-p.r * tau)) < 1e-8

    def test_non_convergence_reports_estimate(self):
        starved = Quadrature(epsabs=1e-300, epsrel=1e-300, limit=2, n_sd=40)
        with pytest.raises(NumericError) as err:
            kernel_mass(MarketParams(0.0, 0.2), 0.0, 1.0, starved)
        assert err.value.estimate is not None


class TestSemigroup:
    def test_frozen_example(self):
        assert semigroup_compose(HERM, 0.5, 0.5, 0.0, 0.0) == pytest.approx(1.95521346987728, abs=1e-6)

    def test_short_second_step(self):
        p = MarketParams(0.03, 0.25)
        got = semigroup_compose(p, 1.0, 1e-4, 0.2, 0.0)
        assert got == pytest.approx(kernel(p, 0.2, 0.0, 1.0), rel=1e-3)

    @given(markets(), st.floats(0.01, 5), st.floats(0.01, 5), st.floats(-0.5, 0.5), st.floats(-2, 2))
    def test_chapman_kolmogorov(self, p, t1, t2, xp, u):
        x = xp + center_shift(p, t1 + t2) + u * p.sigma * math.sqrt(t1 + t2)
        assert abs(semigroup_compose(p, t1, t2, x, xp) - kernel(p, x, xp, t1 + t2)) < 1e-6

    def test_zero_rate_composed_mass(self):
        from scipy import integrate

        p = MarketParams(0.0, 0.3)
        c, sd = center_shift(p, 1.0), 0.3
        mass, _ = integrate.quad(lambda x: semigroup_compose(p, 0.4, 0.6, x, 0.0), c - 12 * sd, c + 12 * sd, epsabs=1e-11)
        assert mass == pytest.approx(1.0, abs=1e-7)


class TestTauDerivative:
    def test_matches_central_difference(self):
        p, h = MarketParams(0.05, 0.2), 1e-5
        fd = (kernel(p, 0.3, 0.0, 1 + h) - kernel(p, 0.3, 0.0, 1 - h)) / (2 * h)
        assert kernel_tau_derivative(p, 0.3, 0.0, 1.0) == pytest.approx(fd, rel=1e-8)

    def test_positive_near_zero(self):
        # p itself underflows at d = 0.3, so the sign is read off d ln p / d tau
        assert kernel_log_tau_derivative(MarketParams(0.05, 0.2), 0.3, 0.0, 1e-3) > 1e4
        assert kernel_tau_derivative(MarketParams(0.05, 0.2), 0.01, 0.0, 1e-3) > 0

    def test_log_derivative_consistent(self):
        p = MarketParams(-0.01, 0.4)
        args = (0.7, 0.1, 2.3)
        assert kernel_tau_derivative(p, *args) == pytest.approx(kernel(p, *args) * kernel_log_tau_derivative(p, *args), rel=1e-15)


class TestStationarity:
    def test_zero_rate(self):
        res = stationarity_roots(MarketParams(0.0, 0.2), 1.0)
        assert res.regime == "r-eq-zero"
        assert res.roots[0] == pytest.approx(50 * (math.sqrt(2) - 1), rel=1e-14)
        assert abs(res.roots[0] - 20.7107) < 1e-3

    def test_hermitian_rate(self):
        res = stationarity_roots(HERM, 1.0)
        assert res.regime == "r-eq-half-sigma2"
        assert res.roots[0] == pytest.approx(12.5 * (math.sqrt(5) - 1), rel=1e-14)

    def test_linear_branch_exact(self):
        res = stationarity_roots(MarketParams(-0.02, 0.2), 1.0)
        assert res.regime == "r-eq-neg-half-sigma2"
        assert res.roots == [25.0]
        assert math.isinf(asymptotic_root(MarketParams(-0.02, 0.2), 1.0))

    def test_generic_regime(self):
        res = stationarity_roots(MarketParams(0.07, 0.3), -2.0)
        assert res.regime == "generic"
        assert res.rejected and all(t < 0 for t in res.rejected)

    @pytest.mark.parametrize("r", [0.0, 0.02, 0.1])
    def test_coincident_points(self, r):
        res = stationarity_roots(MarketParams(r, 0.2), 0.0)
        assert res.roots == [0.0] and res.limit_only

    @given(markets(), st.floats(0.001, 20))
    def test_back_substitution(self, p, d):
        res = stationarity_roots(p, d)
        assert res.roots == sorted(res.roots) and all(t >= 0 for t in res.roots)
        for tau in res.roots:
            assert abs(kernel_log_tau_derivative(p, d, 0.0, tau)) < 1e-9
            # the tau-derivative itself, relative to p, where p is representable
            pv = kernel(p, d, 0.0, tau)
            if pv > 1e-250:
                assert abs(kernel_tau_derivative(p, d, 0.0, tau)) <= 1e-9 * pv

    @pytest.mark.parametrize("d", [1e4, -1e4])
    def test_zero_rate_asymptote(self, d):
        p = MarketParams(0.0, 0.2)
        assert stationarity_roots(p, d).roots[0] == pytest.approx(2 * abs(d) / p.sigma**2, rel=0.01)

    @given(st.floats(0.05, 0.8), st.floats(1e3, 1e6), st.booleans())
    def test_large_separation_asymptotes(self, sigma, d, hermitian):
        p = MarketParams(0.5 * sigma**2 if hermitian else 0.0, sigma)
        want = d / sigma**2 if hermitian else 2 * d / sigma**2
        assert asymptotic_root(p, d) == pytest.approx(want, rel=1e-12)
        assert stationarity_roots(p, d).roots[0] == pytest.approx(want, rel=0.01)


class TestTransitionCdf:
    def test_matches_normal_law(self):
        from scipy import stats

        p = MarketParams(0.02, 0.2)
        cdf = transition_cdf(p, 0.0, 1.0)
        law = stats.norm(0.02 - 0.02, 0.2)
        x = np.linspace(-0.8, 0.8, 31)
        np.testing.assert_allclose(cdf(x), law.cdf(x), atol=1e-6)
