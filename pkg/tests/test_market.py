from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from bsflow.errors import DomainError
from bsflow.market import (
    MarketParams,
    deterministic_price,
    ks_distance,
    simulate_gbm,
    terminal_log_density,
)


class TestMarketParams:
    def test_negative_sigma_rejected(self):
        with pytest.raises(DomainError):
            MarketParams(0.05, -0.1)

    def test_zero_sigma_allowed_but_not_for_kernels(self):
        p = MarketParams(0.05, 0.0)
        with pytest.raises(DomainError):
            p.require_volatility()

    def test_nonfinite_rejected(self):
        with pytest.raises(DomainError):
            MarketParams(float("nan"), 0.2)

    def test_rate_flag_and_drift_gap(self):
        p = MarketParams(-0.02, 0.2)
        assert not p.nonnegative_rate
        assert p.drift_gap == pytest.approx(0.04)
        assert MarketParams(0.02, 0.2).is_hermitian


class TestDeterministicPrice:
    def test_zero_drift(self):
        assert deterministic_price(100, 0.0, 5) == 100

    def test_frozen_values(self):
        # frozen at 30 digits: 100 e^{0.1}, e^{-0.02}
        assert deterministic_price(100, 0.05, 2) == pytest.approx(110.517091807564762, rel=1e-14)
        assert deterministic_price(1, -0.02, 1) == pytest.approx(0.980198673306755302, rel=1e-14)

    def test_nonpositive_s0(self):
        with pytest.raises(DomainError):
            deterministic_price(0.0, 0.05, 1)


class TestSimulateGBM:
    def test_sigma_zero_is_deterministic(self):
        ens = simulate_gbm(MarketParams(0.0, 0.0, phi=0.05), 100, 2, 10, 50, seed=1)
        np.testing.assert_allclose(ens.terminal_values, 100 * math.exp(0.1), rtol=1e-13)

    def test_tiny_sigma_continuity(self):
        ens = simulate_gbm(MarketParams(0.0, 1e-8, phi=0.05), 100, 2, 20, 1000, seed=2)
        assert np.max(np.abs(ens.terminal_values / deterministic_price(100, 0.05, 2) - 1)) < 1e-6

    def test_bit_identical_for_equal_seeds(self):
        p = MarketParams(0.02, 0.2, phi=0.07)
        a = simulate_gbm(p, 1, 1, 5, 1000, seed=99)
        b = simulate_gbm(p, 1, 1, 5, 1000, seed=99)
        assert a.terminal_values.tobytes() == b.terminal_values.tobytes()
        c = simulate_gbm(p, 1, 1, 5, 1000, seed=100)
        assert not np.array_equal(a.terminal_values, c.terminal_values)

    def test_drift_mode_selects_rate(self):
        p = MarketParams(0.02, 0.0, phi=0.3)
        rn = simulate_gbm(p, 1, 1, 1, 3, seed=0, drift_mode="risk-neutral")
        np.testing.assert_allclose(rn.terminal_values, math.exp(0.02))
        with pytest.raises(DomainError):
            simulate_gbm(p, 1, 1, 1, 3, seed=0, drift_mode="sideways")

    @pytest.mark.parametrize("kw", [dict(s0=0.0), dict(horizon=-1.0), dict(n_steps=0), dict(n_paths=0)])
    def test_domain_errors(self, kw):
        args = dict(s0=1.0, horizon=1.0, n_steps=1, n_paths=1)
        args.update(kw)
        with pytest.raises(DomainError):
            simulate_gbm(MarketParams(0.0, 0.2), seed=0, **args)

    def test_zero_drift_log_mean(self):
        ens = simulate_gbm(MarketParams(0.0, 0.2), 1, 1, 4, 200_000, seed=3, drift_mode="risk-neutral")
        x = ens.log_terminal
        assert abs(x.mean() + 0.02) < 4 * x.std() / math.sqrt(len(x))

    def test_risk_neutral_mean(self):
        ens = simulate_gbm(MarketParams(0.02, 0.2), 1, 1, 1, 1_000_000, seed=4, drift_mode="risk-neutral")
        s = ens.terminal_values
        se = s.std(ddof=1) / math.sqrt(len(s))
        assert abs(s.mean() - math.exp(0.02)) < 3 * se

    def test_discounted_martingale(self):
        ens = simulate_gbm(MarketParams(0.05, 0.3), 2.0, 1.0, 12, 100_000, seed=5, drift_mode="risk-neutral")
        s = math.exp(-0.05) * ens.terminal_values
        assert abs(s.mean() - 2.0) < 4 * s.std(ddof=1) / math.sqrt(len(s))

    def test_positive_terminal_values(self):
        ens = simulate_gbm(MarketParams(0.0, 0.8, phi=-1.0), 1, 10, 50, 2000, seed=6)
        assert np.all(ens.terminal_values > 0)
        assert len(ens.terminal_values) == ens.n_paths


class TestTerminalDensity:
    def test_frequencies_sum_to_one_and_cover_range(self):
        ens = simulate_gbm(MarketParams(0.02, 0.2), 1, 1, 1, 5000, seed=8, drift_mode="risk-neutral")
        edges, freq = terminal_log_density(ens, 40)
        assert freq.sum() == pytest.approx(1.0, abs=1e-12)
        assert edges[0] <= ens.log_terminal.min() and edges[-1] >= ens.log_terminal.max()

    def test_single_path_single_bin(self):
        ens = simulate_gbm(MarketParams(0.02, 0.2), 1, 1, 1, 1, seed=8)
        _, freq = terminal_log_density(ens, 10)
        assert sorted(freq)[-1] == 1.0 and np.count_nonzero(freq) == 1

    def test_sigma_zero_mass_in_one_bin(self):
        ens = simulate_gbm(MarketParams(0.0, 0.0, phi=0.05), 1, 1, 1, 100, seed=0)
        edges, freq = terminal_log_density(ens, 7)
        k = int(np.argmax(freq))
        assert freq[k] == 1.0 and edges[k] <= 0.05 <= edges[k + 1]

    def test_bins_validated(self):
        ens = simulate_gbm(MarketParams(0.0, 0.2), 1, 1, 1, 10, seed=0)
        with pytest.raises(DomainError):
            terminal_log_density(ens, 1)

    def test_ks_against_lognormal_law(self):
        ens = simulate_gbm(MarketParams(0.02, 0.2), 1, 1, 1, 100_000, seed=11, drift_mode="risk-neutral")
        law = stats.norm(loc=0.02 - 0.02, scale=0.2)
        assert ks_distance(ens.log_terminal, law.cdf) < 0.01


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_any_seed_reproducible(seed):
    p = MarketParams(0.01, 0.3, phi=0.04)
    a = simulate_gbm(p, 5.0, 0.5, 3, 64, seed)
    b = simulate_gbm(p, 5.0, 0.5, 3, 64, seed)
    assert np.array_equal(a.terminal_values, b.terminal_values)
