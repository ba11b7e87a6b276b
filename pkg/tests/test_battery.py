import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windcheck.battery import (CONSUMPTION_TABLE, HIGH, NORMAL, TABLE,
                               ActionKind, BatteryParams, BatteryState,
                               BatteryVariant, action_consumption,
                               coulomb_step, fade_on_recharge, fresh_battery,
                               is_safe, soc_after_plan, voltage_level)

P = BatteryParams()
PT = BatteryParams(consumption_mode=TABLE)

INS = ActionKind.INSPECT_TURBINE
TR = ActionKind.TRANSIT_PER_CELL
TO = ActionKind.TAKE_OFF
LA = ActionKind.LAND


# ---------------------------------------------------------------------------
# Voltage band
# ---------------------------------------------------------------------------

def test_voltage_band_examples():
    assert voltage_level(0.8, P) == 25.0
    assert voltage_level(0.75, P) == 22.0     # boundary belongs to the middle
    assert voltage_level(0.25, P) == 22.0
    assert voltage_level(0.2, P) == 20.0
    assert voltage_level(1.0, P) == 25.0
    assert voltage_level(0.0, P) == 20.0


def test_voltage_band_rejects_bad_fraction():
    with pytest.raises(ValueError):
        voltage_level(1.2, P)


@settings(max_examples=200)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_voltage_monotone_step(a, b):
    lo, hi = min(a, b), max(a, b)
    assert voltage_level(lo, P) <= voltage_level(hi, P)


def test_voltage_has_exactly_two_breakpoints():
    eps = 1e-9
    assert voltage_level(P.soc_hi_threshold + eps, P) == P.v_high
    assert voltage_level(P.soc_hi_threshold, P) == P.v_med
    assert voltage_level(P.soc_lo_threshold, P) == P.v_med
    assert voltage_level(P.soc_lo_threshold - eps, P) == P.v_low


# ---------------------------------------------------------------------------
# Consumption
# ---------------------------------------------------------------------------

def test_inspection_consumption_published_values_exact():
    # 180 * 0.25 / (25 * 0.5) and 180 * 0.25 / (20 * 0.5)
    assert action_consumption(INS, 25.0, NORMAL, P) == 3.6
    assert action_consumption(INS, 20.0, NORMAL, P) == 4.5


def test_inspection_medium_voltage_from_formula():
    # the formula gives 45/11, not the published rounded 4.0
    assert action_consumption(INS, 22.0, NORMAL, P) == pytest.approx(45 / 11, abs=0)


def test_table_override_returns_published_literals():
    assert action_consumption(INS, 22.0, NORMAL, PT) == 4.0
    assert action_consumption(TO, 25.0, NORMAL, PT) == 0.1
    assert action_consumption(TR, 20.0, NORMAL, PT) == 0.5
    # high power scales the literals by t_normal / t_high
    assert action_consumption(INS, 25.0, HIGH, PT) == pytest.approx(5.4)


def test_consumption_strictly_decreasing_in_voltage_and_endurance():
    for kind in ActionKind:
        lo = action_consumption(kind, P.v_low, NORMAL, P)
        med = action_consumption(kind, P.v_med, NORMAL, P)
        hi = action_consumption(kind, P.v_high, NORMAL, P)
        assert lo > med > hi
        assert action_consumption(kind, P.v_med, HIGH, P) > med


# ---------------------------------------------------------------------------
# Coulomb counting
# ---------------------------------------------------------------------------

def test_coulomb_step_direct_substitution():
    frac, depleted = coulomb_step(1.0, 11.0, 0.1, 11.0)
    assert frac == pytest.approx(0.9, abs=0)
    assert not depleted


def test_coulomb_step_zero_current():
    frac, depleted = coulomb_step(0.5, 0.0, 1.0, 11.0)
    assert frac == 0.5 and not depleted


def test_coulomb_step_clamps_and_flags_depletion():
    frac, depleted = coulomb_step(0.1, 22.0, 1.0, 11.0)
    assert frac == 0.0 and depleted


def test_coulomb_matches_consumption_at_constant_power():
    # discharging at P = e_spec / T_k for the action duration moves the SOC
    # fraction by exactly action_consumption / q_max
    for kind in ActionKind:
        for level, t_k in ((NORMAL, P.t_normal), (HIGH, P.t_high)):
            for volts in (P.v_low, P.v_med, P.v_high):
                power = P.e_spec / t_k
                current = power / volts
                frac, _ = coulomb_step(1.0, current, P.durations_h[kind], P.c_new)
                drop = 1.0 - frac
                expected = action_consumption(kind, volts, level, P) / P.c_new
                assert abs(drop - expected) <= 1e-12


# ---------------------------------------------------------------------------
# Capacity fade
# ---------------------------------------------------------------------------

def test_fade_single_recharge():
    state = fade_on_recharge(fresh_battery(P), P)
    assert state.c_full == 11.0 * 0.998
    assert state.soc == state.c_full
    assert state.recharges == 1


def test_fade_disabled_when_rate_zero():
    p0 = BatteryParams(fade_rate=0.0)
    state = fade_on_recharge(fresh_battery(p0), p0)
    assert state.c_full == 11.0


def test_fade_closed_form_exact():
    state = fresh_battery(P)
    for _ in range(80):
        state = fade_on_recharge(state, P)
    assert state.c_full == 11.0 * 0.998 ** 80
    # roughly a 14.8% loss over 80 cycles
    assert 0.147 < 1.0 - state.c_full / 11.0 < 0.149


def test_basic_variants_restore_new_capacity():
    state = fade_on_recharge(fresh_battery(P), P, BatteryVariant.BASIC_HIGH)
    assert state.c_full == 11.0


# ---------------------------------------------------------------------------
# Plan projection and the safety rule
# ---------------------------------------------------------------------------

def test_plan_single_landing_table_mode():
    final = soc_after_plan(fresh_battery(PT), [LA], NORMAL, PT)
    assert final == pytest.approx(11.0 - 0.1, abs=0)


def test_plan_band_selected_from_running_fraction():
    state = BatteryState(soc=5.5, c_full=11.0)     # fraction 0.5: medium band
    final = soc_after_plan(state, [INS], NORMAL, PT)
    assert final == pytest.approx(5.5 - 4.0, abs=0)


def test_plan_round_trip_with_band_reevaluation():
    # transit, transit, inspect, transit, transit, land from a full battery:
    # the first three run in the high band (0.3 + 0.3 + 3.6), after which
    # 6.8/11 = 0.62 falls into the middle band (0.4 + 0.4 + 0.2)
    plan = [TR, TR, INS, TR, TR, LA]
    final = soc_after_plan(fresh_battery(PT), plan, NORMAL, PT)
    assert final == pytest.approx(11.0 - (0.3 + 0.3 + 3.6 + 0.4 + 0.4 + 0.2))


def test_plan_may_go_negative():
    state = BatteryState(soc=1.0, c_full=11.0)
    final = soc_after_plan(state, [INS], NORMAL, PT)
    assert final < 0


def test_plan_per_step_wind_levels():
    final = soc_after_plan(fresh_battery(PT), [TR, TR], [NORMAL, HIGH], PT)
    assert final == pytest.approx(11.0 - 0.3 - 0.45)


@settings(max_examples=100, deadline=None)
@given(st.permutations([TO, TR, TR, INS, LA]))
def test_plan_permutation_invariant_with_pinned_voltage(plan):
    base = soc_after_plan(fresh_battery(PT), [TO, TR, TR, INS, LA], NORMAL, PT,
                          BatteryVariant.BASIC_MEDIUM)
    other = soc_after_plan(fresh_battery(PT), list(plan), NORMAL, PT,
                           BatteryVariant.BASIC_MEDIUM)
    assert other == pytest.approx(base, abs=1e-12)


def test_plan_matches_stepwise_fold():
    state = fresh_battery(PT)
    plan = [TO, TR, INS, TR, LA]
    expected = state.soc
    running = state.soc
    for kind in plan:
        frac = min(max(running / state.c_full, 0.0), 1.0)
        volts = voltage_level(frac, PT)
        cost = action_consumption(kind, volts, NORMAL, PT)
        running -= cost
        expected -= cost
    assert soc_after_plan(state, plan, NORMAL, PT) == pytest.approx(expected, abs=0)


def test_is_safe_boundary_inclusive():
    # projected SOC exactly at the threshold counts as safe
    state = BatteryState(soc=7.3, c_full=11.0)
    # 7.3 - 4.0 (medium band) = 3.3 == 0.3 * 11.0
    assert is_safe(state, [INS], NORMAL, 0.3, PT)


def test_is_safe_one_turbine_plan_at_defaults():
    plan = [TR, TR, INS, TR, TR, LA]
    assert is_safe(fresh_battery(PT), plan, NORMAL, 0.3, PT)


def test_is_safe_extreme_threshold():
    assert not is_safe(fresh_battery(P), [LA], NORMAL, 0.99, P)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 0.98), st.floats(0.0, 0.98))
def test_is_safe_monotone_in_threshold(a, b):
    lo, hi = min(a, b), max(a, b)
    state = fresh_battery(PT)
    plan = [TO, TR, INS]
    if is_safe(state, plan, NORMAL, hi, PT):
        assert is_safe(state, plan, NORMAL, lo, PT)


def test_params_validation():
    with pytest.raises(ValueError):
        BatteryParams(v_low=25.0, v_med=22.0, v_high=20.0)
    with pytest.raises(ValueError):
        BatteryParams(soc_lo_threshold=0.8, soc_hi_threshold=0.7)
    with pytest.raises(ValueError):
        BatteryParams(t_high=0.6)
    with pytest.raises(ValueError):
        BatteryParams(fade_rate=1.0)
