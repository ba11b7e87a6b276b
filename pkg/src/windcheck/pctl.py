"""PCTL formulas and the model checker.

Grammar (PRISM-like):

    P=? [ F "success" ]            numerical reachability query
    P>=0.5 [ X "a" ]               probability bound
    P=? [ "a" U<=3 "b" ]           bounded until
    R{"mt"}=? [ F "done" ]         expected reachability reward
    !"a" & ("b" | P>0.1 [ "a" U "b" ])

Numerical queries (P=?, R{..}=?) are only allowed at the top level.
`F phi` is parsed as `true U phi` (same code path).  Probability bounds
are compared with a 1e-9 epsilon band; ties at the bound satisfy >= and <=.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .dtmc import Dtmc
from .expr import GclSyntaxError, Token, TokenStream, tokenize
from .solver import SolveStats, SolverOptions, solve_bounded_until, solve_next, \
    solve_reach_reward, solve_until

BOUND_EPSILON = 1e-9


class PctlError(ValueError):
    """Malformed property text."""


class UnknownLabelError(KeyError):
    pass


class UnknownRewardError(KeyError):
    pass


# ---------------------------------------------------------------------------
# Formula AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrueF:
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class Ap:
    name: str

    def __str__(self):
        return f'"{self.name}"'


@dataclass(frozen=True)
class Not:
    phi: "StateFormula"

    def __str__(self):
        return f"!{self.phi}"


@dataclass(frozen=True)
class And:
    lhs: "StateFormula"
    rhs: "StateFormula"

    def __str__(self):
        return f"({self.lhs} & {self.rhs})"


@dataclass(frozen=True)
class Or:
    lhs: "StateFormula"
    rhs: "StateFormula"

    def __str__(self):
        return f"({self.lhs} | {self.rhs})"


@dataclass(frozen=True)
class Next:
    phi: "StateFormula"

    def __str__(self):
        return f"X {self.phi}"


@dataclass(frozen=True)
class Until:
    lhs: "StateFormula"
    rhs: "StateFormula"
    bound: Optional[int] = None       # None: unbounded

    def __str__(self):
        b = f"<={self.bound}" if self.bound is not None else ""
        return f"{self.lhs} U{b} {self.rhs}"


PathFormula = Union[Next, Until]


@dataclass(frozen=True)
class ProbBound:
    op: str                           # <, <=, >, >=
    p: float
    path: PathFormula

    def __str__(self):
        return f"P{self.op}{self.p} [ {self.path} ]"


@dataclass(frozen=True)
class ProbQuery:
    path: PathFormula

    def __str__(self):
        return f"P=? [ {self.path} ]"


@dataclass(frozen=True)
class RewardQuery:
    reward: str
    target: "StateFormula"

    def __str__(self):
        return f'R{{"{self.reward}"}}=? [ F {self.target} ]'


StateFormula = Union[TrueF, Ap, Not, And, Or, ProbBound]
Formula = Union[StateFormula, ProbQuery, RewardQuery]


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def parse_formula(text: str) -> Formula:
    ts = TokenStream(tokenize(text))
    f = _parse_top(ts)
    if ts.current.kind != "eof":
        raise PctlError(f"trailing input after formula: {ts.current.text!r}")
    return f


def _parse_top(ts: TokenStream) -> Formula:
    tok = ts.current
    if tok.kind == "ident" and tok.text == "P":
        save = ts._pos
        ts.consume()
        if ts.accept("=?"):
            path = _parse_bracketed_path(ts)
            return ProbQuery(path)
        ts._pos = save
    if tok.kind == "ident" and tok.text == "R":
        return _parse_reward_query(ts)
    return _parse_or_formula(ts)


def _parse_reward_query(ts: TokenStream) -> RewardQuery:
    ts.consume()                       # R
    ts.expect("{")
    name = ts.expect_kind("string").text
    ts.expect("}")
    ts.expect("=?")
    ts.expect("[")
    tok = ts.expect_kind("ident")
    if tok.text != "F":
        raise PctlError("reward queries support only the form R{\"name\"}=? [ F phi ]")
    target = _parse_or_formula(ts)
    ts.expect("]")
    return RewardQuery(name, target)


def _parse_bracketed_path(ts: TokenStream) -> PathFormula:
    ts.expect("[")
    path = _parse_path(ts)
    ts.expect("]")
    return path


def _parse_path(ts: TokenStream) -> PathFormula:
    tok = ts.current
    if tok.kind == "ident" and tok.text == "X":
        ts.consume()
        return Next(_parse_or_formula(ts))
    if tok.kind == "ident" and tok.text == "F":
        ts.consume()
        bound = _parse_step_bound(ts)
        return Until(TrueF(), _parse_or_formula(ts), bound)
    lhs = _parse_or_formula(ts)
    tok = ts.expect_kind("ident")
    if tok.text != "U":
        raise PctlError(f"expected path operator, found {tok.text!r}")
    bound = _parse_step_bound(ts)
    rhs = _parse_or_formula(ts)
    return Until(lhs, rhs, bound)


def _parse_step_bound(ts: TokenStream) -> Optional[int]:
    if ts.accept("<="):
        tok = ts.expect_kind("int")
        return int(tok.text)
    return None


def _parse_or_formula(ts: TokenStream) -> StateFormula:
    lhs = _parse_and_formula(ts)
    while ts.accept("|"):
        lhs = Or(lhs, _parse_and_formula(ts))
    return lhs


def _parse_and_formula(ts: TokenStream) -> StateFormula:
    lhs = _parse_unary_formula(ts)
    while ts.accept("&"):
        lhs = And(lhs, _parse_unary_formula(ts))
    return lhs


def _parse_unary_formula(ts: TokenStream) -> StateFormula:
    if ts.accept("!"):
        return Not(_parse_unary_formula(ts))
    return _parse_atom_formula(ts)


def _parse_atom_formula(ts: TokenStream) -> StateFormula:
    tok = ts.current
    if ts.accept("true"):
        return TrueF()
    if tok.kind == "string":
        ts.consume()
        return Ap(tok.text)
    if ts.accept("("):
        inner = _parse_or_formula(ts)
        ts.expect(")")
        return inner
    if tok.kind == "ident" and tok.text == "P":
        ts.consume()
        if ts.at("=?"):
            raise PctlError("P=? is a numerical query; it is only allowed "
                            "at the top level of a formula")
        for op in ("<=", ">=", "<", ">"):
            if ts.accept(op):
                num = ts.accept_kind("double") or ts.expect_kind("int")
                p = float(num.text)
                if not 0.0 <= p <= 1.0:
                    raise PctlError(f"probability bound {p} outside [0,1]")
                return ProbBound(op, p, _parse_bracketed_path(ts))
        raise PctlError("expected a probability bound after P")
    if tok.kind == "ident" and tok.text == "R":
        raise PctlError("R{..}=? is a numerical query; it is only allowed "
                        "at the top level of a formula")
    raise PctlError(f"expected a state formula, found {tok.text!r}")


# ---------------------------------------------------------------------------
# Checking
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    formula: str
    kind: str                         # 'boolean' | 'probability' | 'reward'
    values: np.ndarray                # per-state (bool or float)
    value: object                     # value at the initial state
    stats: SolveStats

    @property
    def sat(self) -> np.ndarray:
        if self.kind != "boolean":
            raise ValueError("satisfaction set is defined for boolean formulas")
        return self.values


class _Checker:
    def __init__(self, d: Dtmc, opts: SolverOptions):
        self.d = d
        self.opts = opts
        self.stats = SolveStats()

    def state_values(self, f: StateFormula) -> np.ndarray:
        d = self.d
        if isinstance(f, TrueF):
            return np.ones(d.n_states, dtype=bool)
        if isinstance(f, Ap):
            if f.name not in d.labels:
                raise UnknownLabelError(f.name)
            return d.labels[f.name]
        if isinstance(f, Not):
            return ~self.state_values(f.phi)
        if isinstance(f, And):
            return self.state_values(f.lhs) & self.state_values(f.rhs)
        if isinstance(f, Or):
            return self.state_values(f.lhs) | self.state_values(f.rhs)
        if isinstance(f, ProbBound):
            values = self.path_values(f.path)
            return _compare(values, f.op, f.p)
        raise TypeError(f"not a state formula: {f!r}")

    def path_values(self, path: PathFormula) -> np.ndarray:
        if isinstance(path, Next):
            target = self.state_values(path.phi)
            return solve_next(self.d, target)
        if isinstance(path, Until):
            lhs = self.state_values(path.lhs)
            rhs = self.state_values(path.rhs)
            if path.bound is not None:
                return solve_bounded_until(self.d, lhs, rhs, path.bound)
            values, stats = solve_until(self.d, lhs, rhs, self.opts)
            self.stats = self.stats.merge(stats)
            return values
        raise TypeError(f"not a path formula: {path!r}")


def _compare(values: np.ndarray, op: str, p: float) -> np.ndarray:
    if op == ">=":
        return values >= p - BOUND_EPSILON
    if op == "<=":
        return values <= p + BOUND_EPSILON
    if op == ">":
        return values > p + BOUND_EPSILON
    if op == "<":
        return values < p - BOUND_EPSILON
    raise ValueError(f"unknown bound operator {op!r}")


def check(d: Dtmc, formula: Union[str, Formula],
          options: Optional[SolverOptions] = None) -> CheckResult:
    """Check a formula bottom-up; numerical queries report the value at the
    initial state along with the full per-state vector."""
    if isinstance(formula, str):
        text = formula.strip()
        formula = parse_formula(formula)
    else:
        text = str(formula)
    opts = options or SolverOptions()
    checker = _Checker(d, opts)
    if isinstance(formula, ProbQuery):
        values = checker.path_values(formula.path)
        return CheckResult(text, "probability", values,
                           float(values[d.initial]), checker.stats)
    if isinstance(formula, RewardQuery):
        if formula.reward not in d.rewards:
            raise UnknownRewardError(formula.reward)
        target = checker.state_values(formula.target)
        values, stats = solve_reach_reward(
            d, d.rewards[formula.reward], target, opts)
        checker.stats = checker.stats.merge(stats)
        return CheckResult(text, "reward", values,
                           float(values[d.initial]), checker.stats)
    values = checker.state_values(formula)
    return CheckResult(text, "boolean", values,
                       bool(values[d.initial]), checker.stats)


def prob_next(d: Dtmc, target) -> np.ndarray:
    """value(s) = sum of P(s,s') over s' in target."""
    from .dtmc import as_state_mask
    return solve_next(d, as_state_mask(target, d.n_states))


def prob_bounded_until(d: Dtmc, lhs, rhs, t: int) -> np.ndarray:
    from .dtmc import as_state_mask
    return solve_bounded_until(d, as_state_mask(lhs, d.n_states),
                               as_state_mask(rhs, d.n_states), t)


def prob_until(d: Dtmc, lhs, rhs,
               options: Optional[SolverOptions] = None) -> np.ndarray:
    from .dtmc import as_state_mask
    values, _ = solve_until(d, as_state_mask(lhs, d.n_states),
                            as_state_mask(rhs, d.n_states), options)
    return values


def expected_reachability_reward(d: Dtmc, reward, target,
                                 options: Optional[SolverOptions] = None) -> np.ndarray:
    from .dtmc import as_state_mask
    if isinstance(reward, str):
        if reward not in d.rewards:
            raise UnknownRewardError(reward)
        reward = d.rewards[reward]
    values, _ = solve_reach_reward(d, reward, as_state_mask(target, d.n_states),
                                   options)
    return values
