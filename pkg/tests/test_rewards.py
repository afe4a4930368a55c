"""Hand-computed cases for the reward, cost and energy formulas."""

import numpy as np
import pytest

from agri_offload.agents import (
    battery_reward_level,
    delay_bucket,
    q_reward,
    q_update,
    q_update_min,
    rs_reward,
    rs_risk_cost,
    violation_severity,
)
from agri_offload.errors import CalledOnSafeAction
from agri_offload.simenv import EnergyLedger
from agri_offload.scenario import EnergyParams


class TestRemainingEnergyFormula:
    PARAMS = EnergyParams(capacity=100, hover=1, transmit=1, idle=1, compute=2)

    def test_untouched_battery(self):
        led = EnergyLedger(self.PARAMS, scale=1.0)
        assert led.remaining(0) == pytest.approx(100.0, abs=1e-9)

    def test_idle_horizon(self):
        led = EnergyLedger(self.PARAMS, scale=1.0)
        assert led.remaining(10) == pytest.approx(70.0, abs=1e-9)

    def test_busy_surcharge(self):
        led = EnergyLedger(self.PARAMS, scale=1.0)
        led.busy_intervals = 5
        assert led.remaining(10) == pytest.approx(65.0, abs=1e-9)

    def test_reference_energy_table_scaled(self):
        table = EnergyParams(capacity=570, hover=211, transmit=17,
                             idle=4320, compute=12960)
        led = EnergyLedger(table, scale=1e-5)
        led.busy_intervals = 300
        expected = 570 - 4548e-5 * 1000 - 8640e-5 * 300
        assert led.remaining(1000) == pytest.approx(expected, abs=1e-9)


class TestQReward:
    def test_balanced_no_violation(self):
        value = q_reward(level=2, delay=0.12, expected_violation=False,
                         severity=0.0, w=0.5, theta_m=1.0, theta_d=1.0)
        assert value == pytest.approx(0.72, abs=1e-9)

    def test_pure_energy_weight(self):
        for level in (0, 1, 2):
            value = q_reward(level, delay=3.0, expected_violation=True,
                             severity=-4.0, w=1.0, theta_m=1.0, theta_d=1.0)
            assert value == pytest.approx(level - 1, abs=1e-9)

    def test_pure_delay_violation_weight(self):
        value = q_reward(level=2, delay=0.4, expected_violation=True,
                         severity=-4.0, w=0.0, theta_m=1.0, theta_d=1.0)
        assert value == pytest.approx(-0.4 / 2 + (-4.0) / 2, abs=1e-9)

    def test_scalers(self):
        value = q_reward(level=1, delay=1.0, expected_violation=False,
                         severity=0.0, w=0.5, theta_m=2.0, theta_d=4.0)
        assert value == pytest.approx(0.0 - 0.5 / 4.0 + 0.5 / 8.0, abs=1e-9)


class TestBatteryLevel:
    def test_chosen_holds_max(self):
        assert battery_reward_level([100.0, 90.0], 0, eps_units=5.0) == 2

    def test_far_below(self):
        assert battery_reward_level([100.0, 87.5], 1, eps_units=5.0) == 0

    def test_hysteresis_band(self):
        assert battery_reward_level([100.0, 92.5], 1, eps_units=5.0) == 1

    @pytest.mark.parametrize("diff,expected", [
        (0.0, 2), (-5.0, 2), (-5.0001, 1), (-7.5, 1), (-9.9999, 1),
        (-10.0, 0), (-12.5, 0),
    ])
    def test_band_boundaries(self, diff, expected):
        assert battery_reward_level([100.0, 100.0 + diff], 1, eps_units=5.0) == expected


class TestViolationSeverity:
    # resources: abs0 (origin), abs1, abs2, mec3; chosen = abs1
    @pytest.mark.parametrize("mec_safe,origin_safe,other_safe,expected", [
        (True, True, True, -4.0),
        (True, True, False, -4.0),
        (True, False, True, -4.0),
        (True, False, False, -4.0),
        (False, True, True, -3.0),
        (False, True, False, -3.0),
        (False, False, True, -2.0),
        (False, False, False, -1.0),
    ])
    def test_cascade_exhaustive(self, mec_safe, origin_safe, other_safe, expected):
        flags = [not origin_safe, True, not other_safe, not mec_safe]
        assert violation_severity(flags, origin=0, chosen=1, n_abs=3) == expected

    def test_called_on_safe_action(self):
        with pytest.raises(CalledOnSafeAction):
            violation_severity([True, False, True, True], origin=0, chosen=1, n_abs=3)

    def test_chosen_is_origin(self):
        # local risky choice, MEC busy, another ABS free -> -2
        flags = [True, False, True]
        assert violation_severity(flags, origin=0, chosen=0, n_abs=2) == -2.0


class TestRsReward:
    def test_pure_energy(self):
        assert rs_reward(level=2, delay=9.9, w=1.0, theta_m=1.0) == pytest.approx(-1.0, abs=1e-9)

    def test_pure_delay(self):
        assert rs_reward(level=0, delay=0.4, w=0.0, theta_m=1.0) == pytest.approx(0.4, abs=1e-9)

    def test_sign_reversal_property(self):
        for level in (0, 1, 2):
            for delay in (0.0, 0.3, 2.5):
                forward = 0.5 * (level - 1) - 0.5 / 1.0 * delay
                assert rs_reward(level, delay, 0.5, 1.0) == pytest.approx(-forward, abs=1e-9)


class TestRiskCost:
    def test_risk_state_high_severity(self):
        assert rs_risk_cost(True, -4.0) == pytest.approx(4.0, abs=1e-9)

    def test_safe_state(self):
        assert rs_risk_cost(False) == pytest.approx(-1.0, abs=1e-9)

    def test_risk_state_low_severity(self):
        assert rs_risk_cost(True, -1.0) == pytest.approx(1.0, abs=1e-9)

    def test_missing_severity_rejected(self):
        with pytest.raises(CalledOnSafeAction):
            rs_risk_cost(True, None)


class TestQUpdate:
    def test_single_step_from_zero(self):
        table = np.zeros((3, 2))
        q_update(table, 0, 1, reward=1.0, s_next=None, alpha=0.05, gamma=0.85)
        assert table[0, 1] == pytest.approx(0.05, abs=1e-12)

    def test_zero_reward_fixed_point(self):
        table = np.zeros((3, 2))
        for _ in range(50):
            q_update(table, 1, 0, reward=0.0, s_next=2, alpha=0.05, gamma=0.85)
        assert np.all(table == 0.0)

    def test_terminal_contraction_to_reward(self):
        import math

        table = np.zeros((1, 1))
        alpha, target = 0.05, 3.0
        visits = math.ceil(math.log(1e-6) / math.log(1 - alpha))
        for _ in range(visits):
            q_update(table, 0, 0, reward=target, s_next=None, alpha=alpha, gamma=0.85)
        assert abs(table[0, 0] - target) < 1e-6 * target

    def test_bootstrap_uses_max(self):
        table = np.zeros((2, 2))
        table[1] = [0.5, 2.0]
        q_update(table, 0, 0, reward=0.0, s_next=1, alpha=1.0, gamma=0.5)
        assert table[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_min_variant_uses_min(self):
        table = np.zeros((2, 2))
        table[1] = [0.5, 2.0]
        q_update_min(table, 0, 0, cost=0.0, s_next=1, alpha=1.0, gamma=0.5)
        assert table[0, 0] == pytest.approx(0.25, abs=1e-12)


class TestDelayBucket:
    @pytest.mark.parametrize("delay,expected", [
        (0.0, 0), (0.5, 0), (0.50001, 1), (0.99, 1), (1.0, 1), (1.00001, 2),
    ])
    def test_deadline_relative(self, delay, expected):
        assert delay_bucket(delay, deadline=1.0) == expected
