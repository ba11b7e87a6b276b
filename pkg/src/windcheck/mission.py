"""Wind-farm inspection mission: model generator and scenario presets.

The drone follows a fixed snake route over the grid, inspecting the turbines
appointed to each cell, returning to the central base to recharge whenever
the battery safety rule says the next inspection cannot be completed with
the safety margin intact.  Wind flips between low and high with probability
p_wsp_c before every action and scales the power demand of whatever the
drone does next; the battery's voltage band and capacity fade make the same
action cost different amounts of charge over the mission.

The generator emits guarded-command text (four modules: Drone, Grid,
Environment, Battery) and compiles it with `gcl.compose_and_build`.  Charge
lives in the state space as an integer number of `quantum_ah` units; all
guards reduce to exact integer arithmetic.

Drone FSM states: 0 charged-at-base, 1 flying out, 2 at target cell,
3 just-inspected, 4 returning, 5 landed, 6 out of battery (absorbing),
7 mission success (absorbing).  Each action is preceded by an environment
step that resolves the wind lottery, so a decision made under one wind
condition can execute under another.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from .battery import (ActionKind, BatteryParams, BatteryVariant, TABLE,
                      action_consumption, with_durations_minutes)
from .dtmc import Dtmc
from .gcl import BuildOptions, compose_and_build, parse_model


class DroneState(enum.IntEnum):
    AT_BASE = 0
    FLYING_OUT = 1
    AT_TARGET = 2
    INSPECTED = 3
    RETURNING = 4
    LANDED = 5
    OUT_OF_BATTERY = 6
    SUCCESS = 7


class WindLevel(enum.IntEnum):
    LOW = 1
    HIGH = 2


PAPER_LITERAL, UNIQUE_COVER = "paper_literal", "unique_cover"
MARGIN_C_NEW, MARGIN_C_FULL = "c_new", "c_full"


@dataclass
class Durations:
    """Per-action durations in minutes (used for the mission-time reward and,
    for the flying actions, converted to hours for consumption)."""
    take_off: float = 1.0
    land: float = 1.0
    transit_per_cell: float = 50.0 / 60.0
    inspect: float = 15.0
    recharge: float = 90.0
    wait: float = 5.0


@dataclass
class MissionConfig:
    grid_width: int = 5
    grid_height: int = 5
    base_x: int = 2
    base_y: int = 2
    safe_t: float = 0.3
    p_wsp_c: float = 0.1
    variant: BatteryVariant = BatteryVariant.ADVANCED
    battery: BatteryParams = field(default_factory=BatteryParams)
    durations: Durations = field(default_factory=Durations)
    appointment_rule: str = PAPER_LITERAL
    consumption_mode: str = TABLE
    quantum_ah: float = 0.05
    max_recharges: int = 100
    safety_margin_base: str = MARGIN_C_NEW
    state_cap: int = 5_000_000

    def __post_init__(self):
        self.variant = BatteryVariant(self.variant)
        if self.grid_width < 1 or self.grid_height < 1:
            raise ValueError("grid must be at least 1x1")
        if not (0 <= self.base_x < self.grid_width
                and 0 <= self.base_y < self.grid_height):
            raise ValueError("base cell outside the grid")
        if not 0.0 <= self.safe_t < 1.0:
            raise ValueError("safe_t must be in [0,1)")
        if not 0.0 <= self.p_wsp_c <= 1.0:
            raise ValueError("p_wsp_c must be in [0,1]")
        if self.appointment_rule not in (PAPER_LITERAL, UNIQUE_COVER):
            raise ValueError(f"unknown appointment rule {self.appointment_rule!r}")
        if self.safety_margin_base not in (MARGIN_C_NEW, MARGIN_C_FULL):
            raise ValueError(f"unknown margin base {self.safety_margin_base!r}")
        if self.quantum_ah <= 0:
            raise ValueError("quantum_ah must be > 0")
        if self.max_recharges < 0:
            raise ValueError("max_recharges must be >= 0")

    def consumption_params(self) -> BatteryParams:
        """Battery parameters used for mission consumption: mission durations
        and the mission-level consumption mode."""
        p = with_durations_minutes(
            self.battery, self.durations.take_off, self.durations.land,
            self.durations.transit_per_cell, self.durations.inspect)
        return replace(p, consumption_mode=self.consumption_mode)


def scenario_preset(scenario: int, **overrides) -> MissionConfig:
    """The four headline parameterizations over (safe_t, p_wsp_c)."""
    table = {
        1: (0.3, 0.1),    # common case, the baseline
        2: (0.25, 0.1),   # risky battery strategy
        3: (0.3, 0.3),    # more dynamic environment
        4: (0.25, 0.3),   # risky strategy in a dynamic environment
    }
    if scenario not in table:
        raise ValueError(f"unknown scenario {scenario}; expected 1..4")
    safe_t, p_wsp_c = table[scenario]
    cfg = MissionConfig(safe_t=safe_t, p_wsp_c=p_wsp_c)
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise ValueError(f"unknown config field {key!r}")
        setattr(cfg, key, value)
    cfg.__post_init__()
    return cfg


# ---------------------------------------------------------------------------
# Grid geometry
# ---------------------------------------------------------------------------

def snake_route(width: int, height: int) -> list:
    """Boustrophedon cell order: row 0 left-to-right, row 1 right-to-left, ..."""
    route = []
    for y in range(height):
        xs = range(width) if y % 2 == 0 else range(width - 1, -1, -1)
        route.extend((x, y) for x in xs)
    return route


def appointed_turbines(cell, grid, rule: str = PAPER_LITERAL) -> int:
    """Number of turbines the cell is responsible for.

    paper_literal inspects every turbine on the cell's corners: 1 at grid
    corners, 2 on edges, 4 in the interior.  unique_cover assigns turbine
    (i, j) to cell (min(i, W-1), min(j, H-1)) so each turbine is inspected
    exactly once.
    """
    x, y = cell
    w, h = grid
    if not (0 <= x < w and 0 <= y < h):
        raise ValueError(f"cell {cell} outside {w}x{h} grid")
    if rule == PAPER_LITERAL:
        return (1 if x in (0, w - 1) else 2) * (1 if y in (0, h - 1) else 2)
    if rule == UNIQUE_COVER:
        return (2 if x == w - 1 else 1) * (2 if y == h - 1 else 1)
    raise ValueError(f"unknown appointment rule {rule!r}")


def travel_cells(from_cell, to_cell) -> int:
    """Cells traversed between two cells: Manhattan distance."""
    return abs(from_cell[0] - to_cell[0]) + abs(from_cell[1] - to_cell[1])


@dataclass
class GridPlan:
    route: list            # snake-ordered (x, y) cells
    appointments: list     # turbines per route position
    distances: list        # base-to-cell cell counts per route position


def grid_plan(cfg: MissionConfig) -> GridPlan:
    route = snake_route(cfg.grid_width, cfg.grid_height)
    grid = (cfg.grid_width, cfg.grid_height)
    base = (cfg.base_x, cfg.base_y)
    return GridPlan(
        route=route,
        appointments=[appointed_turbines(c, grid, cfg.appointment_rule)
                      for c in route],
        distances=[travel_cells(base, c) for c in route],
    )


# ---------------------------------------------------------------------------
# Model text generation
# ---------------------------------------------------------------------------

#: actions that take time / consume charge get a wind lottery of their own;
#: instantaneous decisions ride on the lottery of the preceding action
_REAL_ACTIONS = ["wait", "takeoff", "move", "move_fail", "inspect",
                 "advance", "land", "land_fail", "recharge"]
_DECISIONS = ["abort", "back", "stay", "finish"]

_BAND_PIN = {
    BatteryVariant.BASIC_HIGH: "2",
    BatteryVariant.BASIC_MEDIUM: "1",
    BatteryVariant.BASIC_LOW: "0",
}


class _Generator:
    def __init__(self, cfg: MissionConfig):
        self.cfg = cfg
        self.plan = grid_plan(cfg)
        self.q = cfg.quantum_ah
        bp = cfg.consumption_params()
        self.cnew_u = round(cfg.battery.c_new / self.q)
        if self.cnew_u < 1:
            raise ValueError("quantum_ah too coarse for c_new")
        #: units[(key, wind, band)] -> integer charge units
        self.units = {}
        kinds = {"to": ActionKind.TAKE_OFF, "tr": ActionKind.TRANSIT_PER_CELL,
                 "ins": ActionKind.INSPECT_TURBINE, "la": ActionKind.LAND}
        volts = {0: cfg.battery.v_low, 1: cfg.battery.v_med, 2: cfg.battery.v_high}
        for key, kind in kinds.items():
            for wind, level in ((1, "normal"), (2, "high")):
                for band in (0, 1, 2):
                    c = action_consumption(kind, volts[band], level, bp)
                    u = round(c / self.q)
                    if u < 1:
                        raise ValueError(
                            f"quantum_ah too coarse: {kind.value} at band {band} "
                            f"rounds to zero units")
                    self.units[(key, wind, band)] = u
        self.max_dist = max(self.plan.distances) if self.plan.distances else 0
        self.n_cells = len(self.plan.route)
        hi = Fraction(str(cfg.battery.soc_hi_threshold))
        lo = Fraction(str(cfg.battery.soc_lo_threshold))
        self.hi_num, self.hi_den = hi.numerator, hi.denominator
        self.lo_num, self.lo_den = lo.numerator, lo.denominator
        self.fade_keep = 1 - Fraction(str(cfg.battery.fade_rate))

    # -- expression helpers ---------------------------------------------

    def band_rhs(self, soc_expr: str) -> str:
        pin = _BAND_PIN.get(self.cfg.variant)
        if pin is not None:
            return pin
        return (f"({self.hi_den}*{soc_expr} > {self.hi_num}*fullu ? 2 : "
                f"({self.lo_den}*{soc_expr} >= {self.lo_num}*fullu ? 1 : 0))")

    def cost_rhs(self, key: str, band_expr: str) -> str:
        u = self.units

        def sel(w):
            return (f"({band_expr}=2 ? {u[(key, w, 2)]} : "
                    f"({band_expr}=1 ? {u[(key, w, 1)]} : {u[(key, w, 0)]}))")

        return f"(wsp=2 ? {sel(2)} : {sel(1)})"

    def margin_ok_rhs(self, final: str) -> str:
        st = Fraction(str(self.cfg.safe_t))
        if self.cfg.safety_margin_base == MARGIN_C_NEW:
            margin_u = round(st * self.cnew_u)
            return f"{final} >= {margin_u}"
        return f"{st.denominator}*{final} >= {st.numerator}*fullu"

    def emit_plan(self, lines: list, name: str, steps: list) -> None:
        """A step-wise charge projection: before each step the voltage band is
        re-evaluated from the running level; conditional steps apply only when
        their guard holds.  Ends with the `<name>_ok` safety comparison."""
        cur = "b"
        for i, (key, cond) in enumerate(steps):
            band = f"{name}_bd{i}"
            lines.append(f"formula {band} = {self.band_rhs(cur)};")
            nxt = f"{name}_s{i}"
            cost = self.cost_rhs(key, band)
            if cond is None:
                lines.append(f"formula {nxt} = {cur} - {cost};")
            else:
                lines.append(f"formula {nxt} = ({cond} ? {cur} - {cost} : {cur});")
            cur = nxt
        lines.append(f"formula {name}_ok = {self.margin_ok_rhs(cur)};")

    # -- model text -------------------------------------------------------

    def generate(self) -> str:
        cfg = self.cfg
        W, H = cfg.grid_width, cfg.grid_height
        L: list = []
        L.append("dtmc")
        L.append("")
        L.append(f"// wind-farm inspection mission, {W}x{H} cells, "
                 f"variant {cfg.variant.value}")
        p = Fraction(str(cfg.p_wsp_c))
        L.append(f"const double p_wsp_c = {_frac_literal(p)};")
        L.append("")
        # grid geometry from the route position `cell`
        L.append(f"formula cy = div(cell, {W});")
        L.append(f"formula cx = (mod(cy, 2) = 0 ? mod(cell, {W}) "
                 f": {W - 1} - mod(cell, {W}));")
        L.append(f"formula d0 = abs(cx - {cfg.base_x}) + abs(cy - {cfg.base_y});")
        if cfg.appointment_rule == PAPER_LITERAL:
            L.append(f"formula appt = ((cx = 0 | cx = {W - 1}) ? 1 : 2) * "
                     f"((cy = 0 | cy = {H - 1}) ? 1 : 2);")
        else:
            L.append(f"formula appt = (cx = {W - 1} ? 2 : 1) * "
                     f"(cy = {H - 1} ? 2 : 1);")
        L.append(f"formula complete = cell = {self.n_cells - 1} & done = appt;")
        L.append("")
        # battery capacity after fading, in charge units; without fade the
        # recharge counter is pinned so it does not blow up the state space
        fading = (cfg.variant == BatteryVariant.ADVANCED
                  and cfg.battery.fade_rate > 0)
        self.fading = fading
        if fading:
            keep = _frac_literal(self.fade_keep)
            L.append(f"formula fullu = floor({self.cnew_u} * pow({keep}, r));")
            L.append(f"formula nextfull = floor({self.cnew_u} * pow({keep}, "
                     f"min(r + 1, {cfg.max_recharges})));")
        else:
            L.append(f"formula fullu = {self.cnew_u};")
            L.append(f"formula nextfull = {self.cnew_u};")
        L.append("")
        # current-band action costs (units)
        L.append(f"formula bandc = {self.band_rhs('b')};")
        for key in ("to", "tr", "ins", "la"):
            L.append(f"formula c_{key} = {self.cost_rhs(key, 'bandc')};")
        L.append("")
        # safety projections: each plan ends at the intended inspection;
        # the safe_t margin is the reserve for the trip home
        self.emit_plan(L, "plan0", [("to", None)]
                       + [("tr", f"d0 >= {k}") for k in range(1, self.max_dist + 1)]
                       + [("ins", None)])
        self.emit_plan(L, "plan1", [("tr", f"leg >= {k}")
                                    for k in range(1, self.max_dist + 1)]
                       + [("ins", None)])
        self.emit_plan(L, "planins", [("ins", None)])
        self.emit_plan(L, "planadv", [("tr", None), ("ins", None)])
        L.append("")

        L.append("module Drone")
        L.append("  s : [0..7] init 0;")
        L.append("  [wait]      s=0 & wsp=2 -> true;")
        L.append("  [abort]     ph=1 & s=0 & wsp=1 & !plan0_ok -> (s'=6);")
        L.append("  [takeoff]   s=0 & wsp=1 & plan0_ok -> (s'= d0=0 ? 2 : 1);")
        L.append("  [back]      ph=1 & s=1 & leg=d0 & !plan1_ok -> (s'=4);")
        L.append("  [move]      s=1 & leg>0 & (leg<d0 | plan1_ok) & b>=c_tr "
                 "-> (s'= leg=1 ? 2 : 1);")
        L.append("  [move_fail] s=1 & leg>0 & leg<d0 & b<c_tr -> (s'=6);")
        L.append("  [inspect]   s=2 & planins_ok -> (s'=3);")
        L.append("  [back]      ph=1 & s=2 & !planins_ok -> (s'=4);")
        L.append("  [stay]      ph=1 & s=3 & done<appt & planins_ok -> (s'=2);")
        L.append("  [back]      ph=1 & s=3 & done<appt & !planins_ok -> (s'=4);")
        L.append(f"  [advance]   s=3 & done=appt & cell<{self.n_cells - 1} "
                 "& planadv_ok -> (s'=2);")
        L.append(f"  [back]      ph=1 & s=3 & done=appt & (cell={self.n_cells - 1} "
                 "| !planadv_ok) -> (s'=4);")
        L.append("  [move]      s=4 & leg>0 & b>=c_tr -> true;")
        L.append("  [move_fail] s=4 & leg>0 & b<c_tr -> (s'=6);")
        L.append("  [land]      s=4 & leg=0 & b>=c_la -> (s'=5);")
        L.append("  [land_fail] s=4 & leg=0 & b<c_la -> (s'=6);")
        L.append("  [finish]    ph=1 & s=5 & complete -> (s'=7);")
        L.append("  [recharge]  s=5 & !complete -> (s'=0);")
        L.append("  [] s=6 & ph=1 -> true;")
        L.append("  [] s=7 & ph=1 -> true;")
        L.append("endmodule")
        L.append("")

        L.append("module Grid")
        L.append(f"  cell : [0..{self.n_cells - 1}] init 0;")
        L.append("  done : [0..4] init 0;")
        L.append(f"  leg : [0..{max(self.max_dist, 1)}] init 0;")
        # a return from a finished cell advances the resume target so the
        # drone never re-inspects; the flight home still uses the old cell's
        # distance (updates read the pre-transition state)
        finished = f"s=3 & done=appt & cell<{self.n_cells - 1}"
        L.append("  [takeoff] true -> (leg'=d0);")
        L.append("  [move]    true -> (leg'=leg-1);")
        L.append(f"  [back]    true -> (leg'= s=1 ? d0-leg : d0) & "
                 f"(cell'= {finished} ? cell+1 : cell) & "
                 f"(done'= {finished} ? 0 : done);")
        L.append("  [inspect] true -> (done'=done+1);")
        L.append("  [advance] true -> (cell'=cell+1) & (done'=0);")
        L.append("endmodule")
        L.append("")

        L.append("module Environment")
        L.append("  wsp : [1..2] init 1;")
        L.append("  ph : [0..1] init 0;")
        L.append("  [env] ph=0 -> p_wsp_c:(wsp'=3-wsp)&(ph'=1) "
                 "+ 1-p_wsp_c:(ph'=1);")
        for act in _REAL_ACTIONS:
            L.append(f"  [{act}] ph=1 -> (ph'=0);")
        L.append("endmodule")
        L.append("")

        L.append("module Battery")
        L.append(f"  b : [0..{self.cnew_u}] init {self.cnew_u};")
        if fading:
            L.append(f"  r : [0..{self.cfg.max_recharges}] init 0;")
            recharge = (f"(b'=nextfull) & (r'=min(r+1, {self.cfg.max_recharges}))")
        else:
            L.append("  r : [0..0] init 0;")
            recharge = "(b'=nextfull)"
        L.append("  [takeoff]   true -> (b'=b-c_to);")
        L.append("  [move]      true -> (b'=b-c_tr);")
        L.append("  [advance]   true -> (b'=b-c_tr);")
        L.append("  [inspect]   true -> (b'=b-c_ins);")
        L.append("  [land]      true -> (b'=b-c_la);")
        L.append("  [move_fail] true -> (b'=0);")
        L.append("  [land_fail] true -> (b'=0);")
        L.append(f"  [recharge]  true -> {recharge};")
        L.append("endmodule")
        L.append("")

        L.append('label "success" = s=7;')
        L.append('label "fail" = s=6;')
        L.append('label "done" = s=6 | s=7;')
        L.append("")

        d = cfg.durations
        L.append('rewards "mt"')
        L.append(f"  [takeoff] true : {d.take_off!r};")
        L.append(f"  [move] true : {d.transit_per_cell!r};")
        L.append(f"  [advance] true : {d.transit_per_cell!r};")
        L.append(f"  [inspect] true : {d.inspect!r};")
        L.append(f"  [land] true : {d.land!r};")
        L.append(f"  [wait] true : {d.wait!r};")
        L.append(f"  [recharge] true : {d.recharge!r};")
        L.append("endrewards")
        L.append("")
        L.append('rewards "rc"')
        L.append("  [recharge] true : 1;")
        L.append("endrewards")
        return "\n".join(L) + "\n"


def _frac_literal(f: Fraction) -> str:
    """Emit a Fraction as model text (decimal literal or integer ratio)."""
    if f.denominator == 1:
        return str(f.numerator)
    fl = float(f)
    if Fraction(repr(fl)) == f:
        return repr(fl)
    return f"{f.numerator}/{f.denominator}"


def build_model_text(cfg: MissionConfig) -> str:
    """The mission as guarded-command source text."""
    return _Generator(cfg).generate()


def build_mission_model(cfg: MissionConfig) -> Dtmc:
    """Generate, parse and explore the mission model.

    The returned DTMC carries the "mt" (mission minutes) and "rc" (recharges)
    reward structures and the labels "success" (s=7), "fail" (s=6) and
    "done" (either).
    """
    text = build_model_text(cfg)
    model = parse_model(text)
    return compose_and_build(model, BuildOptions(state_cap=cfg.state_cap))
