import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windcheck.battery import BatteryParams, BatteryVariant
from windcheck.dtmc import serialize, validate
from windcheck.gcl import compose_and_build, parse_model
from windcheck.mission import (MissionConfig, appointed_turbines,
                               build_mission_model, build_model_text,
                               grid_plan, scenario_preset, snake_route,
                               travel_cells)
from windcheck.pctl import check


def small_config(**overrides) -> MissionConfig:
    """A 3x3 farm with a 7 Ah battery: the full mission dynamics at a size
    that builds in well under a second."""
    cfg = MissionConfig(
        grid_width=3, grid_height=3, base_x=1, base_y=1,
        battery=BatteryParams(c_new=7.0),
        max_recharges=40,
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    cfg.__post_init__()
    return cfg


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def test_snake_route_2x2():
    assert snake_route(2, 2) == [(0, 0), (1, 0), (1, 1), (0, 1)]


def test_snake_route_1x1():
    assert snake_route(1, 1) == [(0, 0)]


def test_snake_route_5x5():
    route = snake_route(5, 5)
    assert len(route) == 25
    assert route[0] == (0, 0)
    assert route[-1] == (4, 4)            # odd row count ends the last row
    assert len(set(route)) == 25


@settings(max_examples=50)
@given(st.integers(1, 6), st.integers(1, 6))
def test_snake_route_visits_each_cell_once_adjacent(w, h):
    route = snake_route(w, h)
    assert len(route) == w * h
    assert len(set(route)) == w * h
    for a, b in zip(route, route[1:]):
        assert travel_cells(a, b) == 1


def test_appointed_turbines_paper_rule():
    grid = (5, 5)
    assert appointed_turbines((0, 0), grid) == 1
    assert appointed_turbines((2, 0), grid) == 2
    assert appointed_turbines((2, 2), grid) == 4


def test_appointed_turbines_totals():
    grid = (5, 5)
    total = sum(appointed_turbines(c, grid) for c in snake_route(5, 5))
    assert total == 4 * 1 + 12 * 2 + 9 * 4 == 64
    unique = sum(appointed_turbines(c, grid, "unique_cover")
                 for c in snake_route(5, 5))
    assert unique == 36                    # one inspection per physical turbine


def test_appointed_turbines_values_in_range():
    for rule in ("paper_literal", "unique_cover"):
        for c in snake_route(5, 5):
            assert appointed_turbines(c, (5, 5), rule) in (1, 2, 4)


def test_travel_cells():
    assert travel_cells((2, 2), (2, 2)) == 0
    assert travel_cells((2, 2), (0, 0)) == 4


@settings(max_examples=100)
@given(st.tuples(st.integers(0, 9), st.integers(0, 9)),
       st.tuples(st.integers(0, 9), st.integers(0, 9)))
def test_travel_cells_symmetric(a, b):
    assert travel_cells(a, b) == travel_cells(b, a)


def test_grid_plan_distances():
    plan = grid_plan(MissionConfig())
    assert plan.distances[0] == 4          # corner (0,0) from base (2,2)
    assert max(plan.distances) == 4
    assert plan.appointments[0] == 1


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def test_scenario_presets():
    assert (scenario_preset(1).safe_t, scenario_preset(1).p_wsp_c) == (0.3, 0.1)
    assert (scenario_preset(2).safe_t, scenario_preset(2).p_wsp_c) == (0.25, 0.1)
    assert (scenario_preset(3).safe_t, scenario_preset(3).p_wsp_c) == (0.3, 0.3)
    assert (scenario_preset(4).safe_t, scenario_preset(4).p_wsp_c) == (0.25, 0.3)


def test_scenario_preset_unknown_id():
    with pytest.raises(ValueError):
        scenario_preset(5)


def test_config_validation():
    with pytest.raises(ValueError):
        MissionConfig(base_x=9)
    with pytest.raises(ValueError):
        MissionConfig(safe_t=1.0)
    with pytest.raises(ValueError):
        MissionConfig(p_wsp_c=1.5)
    with pytest.raises(ValueError):
        MissionConfig(appointment_rule="nope")


# ---------------------------------------------------------------------------
# Model builds
# ---------------------------------------------------------------------------

def test_degenerate_single_cell_huge_battery():
    cfg = MissionConfig(
        grid_width=1, grid_height=1, base_x=0, base_y=0,
        battery=BatteryParams(c_new=10_000.0), p_wsp_c=0.0,
    )
    d = build_mission_model(cfg)
    assert check(d, 'P=? [ F "success" ]').value == 1.0
    assert check(d, 'R{"rc"}=? [ F "done" ]').value == 0.0


def test_wind_deterministic_when_p_zero():
    cfg = small_config(p_wsp_c=0.0)
    d = build_mission_model(cfg)
    fanout = d.indptr[1:] - d.indptr[:-1]
    assert fanout.max() <= 2
    p = check(d, 'P=? [ F "success" ]').value
    assert p in (0.0, 1.0)


def test_mission_validates_clean():
    d = build_mission_model(small_config())
    report = validate(d)
    assert report.ok
    assert not report.unreachable


def risky_config() -> MissionConfig:
    """Small farm with a genuinely risky threshold: some missions are lost."""
    return small_config(safe_t=0.2, battery=BatteryParams(c_new=8.0))


def test_success_fail_disjoint_absorbing_and_exhaustive():
    d = build_mission_model(risky_config())
    succ, fail = d.labels["success"], d.labels["fail"]
    assert not (succ & fail).any()
    assert ((succ | fail) == d.labels["done"]).all()
    # done states never leave the done set
    for s in np.nonzero(d.labels["done"])[0]:
        dst, _ = d.row(int(s))
        assert d.labels["done"][dst].all()
    ps = check(d, 'P=? [ F "success" ]').value
    pf = check(d, 'P=? [ F "fail" ]').value
    assert abs(ps + pf - 1.0) <= 1e-9
    assert 0.0 < ps < 1.0                  # the risky threshold does fail here


def test_fail_state_reachable_only_by_depletion_semantics():
    # with the default threshold the small farm still succeeds surely
    d = build_mission_model(small_config())
    assert check(d, 'P=? [ F "success" ]').value == 1.0


def test_build_is_deterministic():
    cfg = small_config()
    a = build_mission_model(cfg)
    b = build_mission_model(cfg)
    assert serialize(a) == serialize(b)


def test_model_text_reparses_to_identical_model():
    cfg = small_config()
    text = build_model_text(cfg)
    d1 = build_mission_model(cfg)
    d2 = compose_and_build(parse_model(text))
    assert serialize(d1) == serialize(d2)


def test_variants_change_capacity_requirements():
    # the same farm that basic_high completes surely is lost with the
    # pessimistic always-low-voltage assumption
    lo = build_mission_model(small_config(variant=BatteryVariant.BASIC_LOW))
    hi = build_mission_model(small_config(variant=BatteryVariant.BASIC_HIGH))
    p_lo = check(lo, 'P=? [ F "success" ]').value
    p_hi = check(hi, 'P=? [ F "success" ]').value
    assert p_hi >= p_lo


def test_basic_variants_drop_recharge_counter():
    d = build_mission_model(small_config(variant=BatteryVariant.BASIC_HIGH))
    r_col = d.var_names.index("r")
    assert (d.valuations[:, r_col] == 0).all()


def test_reward_structures_present():
    d = build_mission_model(small_config())
    assert set(d.rewards) == {"mt", "rc"}
    mt = check(d, 'R{"mt"}=? [ F "done" ]').value
    rc = check(d, 'R{"rc"}=? [ F "done" ]').value
    assert np.isfinite(mt) and mt > 0
    assert np.isfinite(rc) and rc > 0


def test_recharge_time_priced_into_mission_minutes():
    cfg = small_config()
    slow = small_config()
    slow.durations.recharge = 300.0
    mt_fast = check(build_mission_model(cfg), 'R{"mt"}=? [ F "done" ]').value
    mt_slow = check(build_mission_model(slow), 'R{"mt"}=? [ F "done" ]').value
    rc = check(build_mission_model(cfg), 'R{"rc"}=? [ F "done" ]').value
    assert mt_slow == pytest.approx(mt_fast + (300.0 - 90.0) * rc, rel=1e-9)


def test_unique_cover_needs_fewer_inspections():
    # on a 4x3 farm the corner-count rule inspects 24 turbine positions but
    # only 20 physical turbines exist; unique cover visits each once
    def cfg(rule):
        return MissionConfig(
            grid_width=4, grid_height=3, base_x=1, base_y=1,
            battery=BatteryParams(c_new=7.0), max_recharges=40,
            appointment_rule=rule)
    mt_a = check(build_mission_model(cfg("paper_literal")),
                 'R{"mt"}=? [ F "done" ]').value
    mt_b = check(build_mission_model(cfg("unique_cover")),
                 'R{"mt"}=? [ F "done" ]').value
    assert mt_b < mt_a


def test_emitted_text_mentions_all_modules():
    text = build_model_text(MissionConfig())
    for name in ("module Drone", "module Grid", "module Environment",
                 "module Battery"):
        assert name in text
