"""Nonlinear battery model for the inspection missions.

Charge accounting is plain Coulomb counting; per-action consumption follows
C = E_spec * t / (V * T) with a step-wise voltage that depends on the state
of charge; the fully-charged capacity fades multiplicatively with each
recharge.  Three linear "basic" variants (no fade, pinned voltage level)
serve as comparison baselines.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

NORMAL, HIGH = "normal", "high"


class ActionKind(enum.Enum):
    TAKE_OFF = "take_off"
    LAND = "land"
    TRANSIT_PER_CELL = "transit_per_cell"
    INSPECT_TURBINE = "inspect"


class BatteryVariant(str, enum.Enum):
    ADVANCED = "advanced"
    BASIC_HIGH = "basic_high"
    BASIC_MEDIUM = "basic_medium"
    BASIC_LOW = "basic_low"


#: Published per-action consumption (Ah) at the normal power level,
#: columns (low, medium, high) voltage.  Used by the table-override mode.
CONSUMPTION_TABLE = {
    ActionKind.TAKE_OFF: (0.3, 0.2, 0.1),
    ActionKind.LAND: (0.3, 0.2, 0.1),
    ActionKind.TRANSIT_PER_CELL: (0.5, 0.4, 0.3),
    ActionKind.INSPECT_TURBINE: (4.5, 4.0, 3.6),
}

#: Default action durations in hours: ~1 min take-off and landing, 50 s per
#: 500 m cell at 10 m/s, 15 min per turbine inspection.
DEFAULT_DURATIONS_H = {
    ActionKind.TAKE_OFF: 1.0 / 60.0,
    ActionKind.LAND: 1.0 / 60.0,
    ActionKind.TRANSIT_PER_CELL: 50.0 / 3600.0,
    ActionKind.INSPECT_TURBINE: 0.25,
}

FORMULA, TABLE = "formula", "table"


@dataclass(frozen=True)
class BatteryParams:
    c_new: float = 11.0            # new-battery capacity, Ah
    e_spec: float = 180.0          # specified energy, Wh
    v_high: float = 25.0
    v_med: float = 22.0
    v_low: float = 20.0
    soc_hi_threshold: float = 0.75
    soc_lo_threshold: float = 0.25
    fade_rate: float = 0.002       # capacity loss fraction per recharge
    t_normal: float = 0.5          # endurance (h) at normal power
    t_high: float = 1.0 / 3.0      # endurance (h) at high power
    durations_h: dict = field(default_factory=lambda: dict(DEFAULT_DURATIONS_H))
    consumption_mode: str = FORMULA

    def __post_init__(self):
        if not self.v_low < self.v_med < self.v_high:
            raise ValueError("voltages must satisfy v_low < v_med < v_high")
        if not 0.0 < self.soc_lo_threshold < self.soc_hi_threshold < 1.0:
            raise ValueError("need 0 < soc_lo_threshold < soc_hi_threshold < 1")
        if not 0.0 <= self.fade_rate < 1.0:
            raise ValueError("fade_rate must be in [0,1)")
        if not 0.0 < self.t_high < self.t_normal:
            raise ValueError("need 0 < t_high < t_normal")
        if self.c_new <= 0 or self.e_spec <= 0:
            raise ValueError("c_new and e_spec must be positive")
        if any(t <= 0 for t in self.durations_h.values()):
            raise ValueError("action durations must be positive")
        if self.consumption_mode not in (FORMULA, TABLE):
            raise ValueError(f"unknown consumption mode {self.consumption_mode!r}")


@dataclass(frozen=True)
class BatteryState:
    soc: float                     # remaining charge, Ah
    c_full: float                  # current fully-charged capacity, Ah
    recharges: int = 0

    def __post_init__(self):
        if self.recharges < 0:
            raise ValueError("recharges must be >= 0")
        if not -1e-12 <= self.soc <= self.c_full + 1e-12:
            raise ValueError(f"soc {self.soc} outside [0, c_full={self.c_full}]")


def fresh_battery(params: BatteryParams) -> BatteryState:
    return BatteryState(soc=params.c_new, c_full=params.c_new, recharges=0)


def voltage_level(soc_fraction: float, params: BatteryParams) -> float:
    """Step-wise voltage: high above the upper threshold, low below the
    lower one, medium in between (both boundaries belong to the middle band)."""
    if not 0.0 <= soc_fraction <= 1.0:
        raise ValueError(f"soc fraction {soc_fraction} outside [0,1]")
    if soc_fraction > params.soc_hi_threshold:
        return params.v_high
    if soc_fraction >= params.soc_lo_threshold:
        return params.v_med
    return params.v_low


def _endurance(power_level: str, params: BatteryParams) -> float:
    if power_level == NORMAL:
        return params.t_normal
    if power_level == HIGH:
        return params.t_high
    raise ValueError(f"unknown power level {power_level!r}")


def action_consumption(action: ActionKind, voltage: float, power_level: str,
                       params: BatteryParams) -> float:
    """Charge (Ah) drawn by one action at the given voltage and power level.

    The default computes E_spec*t/(V*T); the table-override mode returns the
    published per-action literals, scaled by t_normal/t_high at high power.
    """
    t_k = _endurance(power_level, params)
    if params.consumption_mode == TABLE:
        cols = CONSUMPTION_TABLE[action]
        if voltage == params.v_high:
            base = cols[2]
        elif voltage == params.v_med:
            base = cols[1]
        elif voltage == params.v_low:
            base = cols[0]
        else:
            raise ValueError(f"voltage {voltage} is not one of the step levels")
        return base * (params.t_normal / t_k)
    t_j = params.durations_h[action]
    return params.e_spec * t_j / (voltage * t_k)


def coulomb_step(soc_fraction: float, current: float, dt: float,
                 q_max: float) -> tuple:
    """One Coulomb-counting step: SOC(k+1) = SOC(k) - I*dt/Q_max.

    Returns (new fraction, depleted flag); results below zero clamp to 0.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if q_max <= 0:
        raise ValueError("q_max must be > 0")
    new = soc_fraction - current * dt / q_max
    if new < 0.0:
        return 0.0, True
    return new, False


def fade_on_recharge(state: BatteryState, params: BatteryParams,
                     variant: BatteryVariant = BatteryVariant.ADVANCED) -> BatteryState:
    """Full recharge: capacity fades multiplicatively (advanced variant);
    basic variants restore the new-battery capacity."""
    n = state.recharges + 1
    if variant == BatteryVariant.ADVANCED:
        c_full = params.c_new * (1.0 - params.fade_rate) ** n
    else:
        c_full = params.c_new
    return BatteryState(soc=c_full, c_full=c_full, recharges=n)


def _pinned_voltage(variant: BatteryVariant, params: BatteryParams) -> Optional[float]:
    if variant == BatteryVariant.BASIC_HIGH:
        return params.v_high
    if variant == BatteryVariant.BASIC_MEDIUM:
        return params.v_med
    if variant == BatteryVariant.BASIC_LOW:
        return params.v_low
    return None


def _wind_per_step(wind: Union[str, Sequence[str]], n: int) -> list:
    if isinstance(wind, str):
        return [wind] * n
    wind = list(wind)
    if len(wind) != n:
        raise ValueError(f"{len(wind)} wind levels for {n} plan steps")
    return wind


def soc_after_plan(state: BatteryState, plan: Sequence[ActionKind],
                   wind: Union[str, Sequence[str]], params: BatteryParams,
                   variant: BatteryVariant = BatteryVariant.ADVANCED) -> float:
    """Projected SOC (Ah) after executing `plan`; may go negative.

    The voltage band is re-evaluated before each action from the running SOC
    fraction (clamped into [0,1] for band lookup once depleted); basic
    variants use their pinned voltage throughout.
    """
    winds = _wind_per_step(wind, len(plan))
    pinned = _pinned_voltage(variant, params)
    soc = state.soc
    for action, w in zip(plan, winds):
        if pinned is None:
            frac = min(max(soc / state.c_full, 0.0), 1.0)
            volts = voltage_level(frac, params)
        else:
            volts = pinned
        soc -= action_consumption(action, volts, w, params)
    return soc


def is_safe(state: BatteryState, plan: Sequence[ActionKind],
            wind: Union[str, Sequence[str]], safe_t: float,
            params: BatteryParams,
            variant: BatteryVariant = BatteryVariant.ADVANCED) -> bool:
    """True iff the projected SOC stays at or above safe_t * c_full
    (the boundary itself counts as safe)."""
    if not 0.0 <= safe_t < 1.0:
        raise ValueError("safe_t must be in [0,1)")
    return soc_after_plan(state, plan, wind, params, variant) >= safe_t * state.c_full


def with_durations_minutes(params: BatteryParams, take_off: float, land: float,
                           transit_per_cell: float, inspect: float) -> BatteryParams:
    """Copy of `params` with action durations given in minutes."""
    return replace(params, durations_h={
        ActionKind.TAKE_OFF: take_off / 60.0,
        ActionKind.LAND: land / 60.0,
        ActionKind.TRANSIT_PER_CELL: transit_per_cell / 60.0,
        ActionKind.INSPECT_TURBINE: inspect / 60.0,
    })
