"""Reference-policy tests: threshold decision rule and uniform random policy."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slsched.baselines import ThresholdConfig, random_policy, threshold_policy
from slsched.env import Action, N_ACTIONS, StateVector


def _state(wifi_idle, residual, occupancy=0.2):
    return StateVector(occupancy, tuple(float(r) for r in residual), wifi_idle)


unit = st.floats(0.0, 1.0)
residuals = st.tuples(unit, unit, unit, unit, unit)


class TestThresholdPolicy:
    def test_idle_wifi_with_free_unlicensed_goes_unlicensed(self):
        s = _state(0.8, (1.0, 1.0, 1.0, 1.0, 1.0))
        assert threshold_policy(s) == Action.SLU_5G

    def test_busy_wifi_all_free_ties_to_lower_sidelink_band(self):
        s = _state(0.3, (1.0, 1.0, 1.0, 1.0, 1.0))
        assert threshold_policy(s) == Action.SLL_28G

    def test_busy_wifi_starved_sidelink_falls_back_to_gnb(self):
        s = _state(0.3, (0.9, 0.4, 0.2, 0.1, 1.0))
        assert threshold_policy(s) == Action.CC_28G

    def test_unlicensed_needs_residual_too(self):
        s = _state(0.9, (1.0, 1.0, 1.0, 1.0, 0.0))
        assert threshold_policy(s) == Action.SLL_28G

    def test_larger_sidelink_residual_wins(self):
        s = _state(0.1, (1.0, 1.0, 0.6, 0.8, 1.0))
        assert threshold_policy(s) == Action.SLL_26G

    def test_larger_gnb_residual_wins_below_pivot(self):
        s = _state(0.1, (0.3, 0.45, 0.2, 0.1, 1.0))
        assert threshold_policy(s) == Action.CC_26G

    def test_custom_pivots_change_branching(self):
        s = _state(0.55, (1.0, 1.0, 0.4, 0.4, 1.0))
        assert threshold_policy(s) == Action.SLU_5G
        strict = ThresholdConfig(wifi_idle_pivot=0.6, licensed_residual_pivot=0.3)
        assert threshold_policy(s, strict) == Action.SLL_28G

    def test_pivot_bounds_validated(self):
        with pytest.raises(ValueError):
            ThresholdConfig(wifi_idle_pivot=1.2)
        with pytest.raises(ValueError):
            ThresholdConfig(licensed_residual_pivot=-0.1)

    @given(wifi=unit, res=residuals)
    @settings(max_examples=300)
    def test_never_unlicensed_below_pivot(self, wifi, res):
        cfg = ThresholdConfig()
        action = threshold_policy(_state(wifi, res), cfg)
        if wifi < cfg.wifi_idle_pivot or res[Action.SLU_5G] <= 0.0:
            assert action != Action.SLU_5G
        assert 0 <= action < N_ACTIONS

    @given(wifi=unit, res=residuals)
    @settings(max_examples=100)
    def test_pure_function(self, wifi, res):
        s = _state(wifi, res)
        assert threshold_policy(s) == threshold_policy(s)


class TestRandomPolicy:
    def test_uniform_within_one_percent(self):
        rng = np.random.default_rng(2024)
        n = 1_000_000
        counts = np.bincount(
            [random_policy(rng) for _ in range(n)], minlength=N_ACTIONS
        )
        freqs = counts / n
        assert np.all(np.abs(freqs - 0.2) < 0.01)

    def test_seeded_determinism(self):
        rng1, rng2 = np.random.default_rng(7), np.random.default_rng(7)
        assert [random_policy(rng1) for _ in range(200)] == [
            random_policy(rng2) for _ in range(200)
        ]

    def test_output_is_valid_action(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            assert 0 <= random_policy(rng) < N_ACTIONS
