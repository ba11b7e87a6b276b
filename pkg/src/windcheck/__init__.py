"""windcheck: explicit-state DTMC checking for battery-constrained missions."""

from .battery import (ActionKind, BatteryParams, BatteryState, BatteryVariant,
                      action_consumption, coulomb_step, fade_on_recharge,
                      fresh_battery, is_safe, soc_after_plan, voltage_level)
from .dtmc import Dtmc, RewardStructure, deserialize, reachable_from, serialize, validate
from .gcl import (BuildOptions, Command, ModuleDef, SymbolicModel, VariableDecl,
                  compose_and_build, parse_model)
from .mission import (Durations, DroneState, GridPlan, MissionConfig, WindLevel,
                      appointed_turbines, build_mission_model, build_model_text,
                      grid_plan, scenario_preset, snake_route, travel_cells)
from .pctl import (CheckResult, check, expected_reachability_reward, parse_formula,
                   prob_bounded_until, prob_next, prob_until)
from .sim import (Estimate, Trace, estimate_expected_reward,
                  estimate_reach_probability, simulate_trace, trace_to_csv)
from .solver import SolverOptions

__version__ = "0.1.0"
