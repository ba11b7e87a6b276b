"""Guarded-command model description language.

A model is a set of modules, each owning bounded-integer or boolean
variables and guarded commands `[action] guard -> p1:(x'=e)&... + p2:...;`.
Commands sharing an action label across modules fire jointly (product of
update probabilities); unlabeled commands fire independently.  The builder
explores the joint state space breadth-first and produces an explicit
`Dtmc`.

Grammar summary (see README for the full reference):

    dtmc
    const double p = 0.1;
    formula f = ...;
    module Name
      x : [0..7] init 0;
      b : bool init false;
      [act] guard -> 0.5:(x'=1) + 0.5:(x'=2);
    endmodule
    label "goal" = x=7;
    rewards "time"
      [act] true : 1;        // transition reward, attached to an action
      x=3 : 2.5;             // state reward
    endrewards
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import expr as ex
from .dtmc import Dtmc, RewardStructure
from .expr import (BOOL, DOUBLE, INT, Expr, GclSyntaxError, GclTypeError,
                   TokenStream, tokenize)


class GclValidationError(ValueError):
    """Semantic errors in an otherwise well-formed model."""


class DeadlockError(RuntimeError):
    """A reachable state enables no command and fix_deadlocks is off."""


class StateCapError(RuntimeError):
    """Exploration exceeded the configured state cap."""


class DomainError(RuntimeError):
    """An update drove a variable outside its declared range."""


# ---------------------------------------------------------------------------
# Model AST
# ---------------------------------------------------------------------------

@dataclass
class VariableDecl:
    name: str
    lo: int                    # 0/1 for booleans
    hi: int
    init: int
    is_bool: bool = False

    @property
    def domain_size(self) -> int:
        return self.hi - self.lo + 1


@dataclass
class Update:
    prob: Optional[Expr]       # None means probability 1
    assignments: list          # list of (var name, Expr)


@dataclass
class Command:
    action: Optional[str]
    guard: Expr
    updates: list              # list of Update


@dataclass
class ModuleDef:
    name: str
    variables: list            # list of VariableDecl
    commands: list             # list of Command


@dataclass
class RewardItem:
    action: Optional[str]      # None: state reward; '': unlabeled transitions
    guard: Expr
    value: Expr


@dataclass
class SymbolicModel:
    modules: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)      # name -> (type, Expr)
    formulas: dict = field(default_factory=dict)       # name -> Expr
    labels: dict = field(default_factory=dict)         # name -> Expr
    rewards: dict = field(default_factory=dict)        # name -> [RewardItem]

    # populated by validation
    const_values: dict = field(default_factory=dict)   # name -> python value
    formula_order: list = field(default_factory=list)  # topological order
    types: dict = field(default_factory=dict)          # name -> type string

    def variables(self) -> list:
        out = []
        for m in self.modules:
            out.extend(m.variables)
        return out


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def parse_model(text: str) -> SymbolicModel:
    """Parse and validate model text; returns a checked SymbolicModel."""
    ts = TokenStream(tokenize(text))
    ts.expect("dtmc")
    model = SymbolicModel()
    while ts.current.kind != "eof":
        if ts.at("const"):
            _parse_const(ts, model)
        elif ts.at("formula"):
            _parse_formula(ts, model)
        elif ts.at("module"):
            _parse_module(ts, model)
        elif ts.at("label"):
            _parse_label(ts, model)
        elif ts.at("rewards"):
            _parse_rewards(ts, model)
        else:
            raise ts.error(f"expected declaration, found {ts.current.text!r}")
    validate_model(model)
    return model


def _parse_const(ts: TokenStream, model: SymbolicModel):
    ts.expect("const")
    if ts.accept("int"):
        ctype = INT
    elif ts.accept("double"):
        ctype = DOUBLE
    elif ts.accept("bool"):
        ctype = BOOL
    else:
        raise ts.error("expected 'int', 'double' or 'bool' after 'const'")
    name = ts.expect_kind("ident").text
    ts.expect("=")
    value = ex.parse_expression(ts)
    ts.expect(";")
    _declare(model, name)
    model.constants[name] = (ctype, value)


def _parse_formula(ts: TokenStream, model: SymbolicModel):
    ts.expect("formula")
    name = ts.expect_kind("ident").text
    ts.expect("=")
    value = ex.parse_expression(ts)
    ts.expect(";")
    _declare(model, name)
    model.formulas[name] = value


def _parse_module(ts: TokenStream, model: SymbolicModel):
    ts.expect("module")
    name = ts.expect_kind("ident").text
    if any(m.name == name for m in model.modules):
        raise ts.error(f"duplicate module name {name!r}")
    mod = ModuleDef(name, [], [])
    while not ts.at("endmodule"):
        if ts.at("["):
            mod.commands.append(_parse_command(ts))
        else:
            mod.variables.append(_parse_vardecl(ts, model))
    ts.expect("endmodule")
    model.modules.append(mod)


def _parse_vardecl(ts: TokenStream, model: SymbolicModel) -> VariableDecl:
    name = ts.expect_kind("ident").text
    ts.expect(":")
    if ts.accept("bool"):
        ts.expect("init")
        init = ex.parse_expression(ts)
        ts.expect(";")
        _declare(model, name)
        return VariableDecl(name, 0, 1, _const_int(init, model, as_bool=True),
                            is_bool=True)
    ts.expect("[")
    lo = ex.parse_expression(ts)
    ts.expect("..")
    hi = ex.parse_expression(ts)
    ts.expect("]")
    ts.expect("init")
    init = ex.parse_expression(ts)
    ts.expect(";")
    _declare(model, name)
    lo_v = _const_int(lo, model)
    hi_v = _const_int(hi, model)
    init_v = _const_int(init, model)
    if lo_v > hi_v:
        raise GclValidationError(f"variable {name!r}: empty range [{lo_v}..{hi_v}]")
    if not lo_v <= init_v <= hi_v:
        raise GclValidationError(
            f"variable {name!r}: init {init_v} outside [{lo_v}..{hi_v}]")
    return VariableDecl(name, lo_v, hi_v, init_v)


def _parse_command(ts: TokenStream) -> Command:
    ts.expect("[")
    action = None
    tok = ts.accept_kind("ident")
    if tok is not None:
        action = tok.text
    ts.expect("]")
    guard = ex.parse_expression(ts)
    ts.expect("->")
    updates = [_parse_update(ts)]
    while ts.accept("+"):
        updates.append(_parse_update(ts))
    ts.expect(";")
    return Command(action, guard, updates)


def _parse_update(ts: TokenStream) -> Update:
    # a probability prefix `expr :` is optional for a single-update command
    save = ts._pos
    prob: Optional[Expr] = None
    try:
        candidate = ex.parse_expression(ts)
        if ts.accept(":"):
            prob = candidate
        else:
            ts._pos = save
    except GclSyntaxError:
        ts._pos = save
    if ts.accept("true"):
        return Update(prob, [])
    assignments = [_parse_assignment(ts)]
    while ts.accept("&"):
        assignments.append(_parse_assignment(ts))
    return Update(prob, assignments)


def _parse_assignment(ts: TokenStream):
    ts.expect("(")
    name = ts.expect_kind("ident").text
    ts.expect("'")
    ts.expect("=")
    value = ex.parse_expression(ts)
    ts.expect(")")
    return (name, value)


def _parse_label(ts: TokenStream, model: SymbolicModel):
    ts.expect("label")
    name = ts.expect_kind("string").text
    ts.expect("=")
    value = ex.parse_expression(ts)
    ts.expect(";")
    if name in model.labels:
        raise GclValidationError(f"duplicate label {name!r}")
    model.labels[name] = value


def _parse_rewards(ts: TokenStream, model: SymbolicModel):
    ts.expect("rewards")
    name = ts.expect_kind("string").text
    if name in model.rewards:
        raise GclValidationError(f"duplicate reward structure {name!r}")
    items = []
    while not ts.at("endrewards"):
        action = None
        if ts.accept("["):
            tok = ts.accept_kind("ident")
            action = tok.text if tok is not None else ""
            ts.expect("]")
        guard = ex.parse_expression(ts)
        ts.expect(":")
        value = ex.parse_expression(ts)
        ts.expect(";")
        items.append(RewardItem(action, guard, value))
    ts.expect("endrewards")
    model.rewards[name] = items


def _declare(model: SymbolicModel, name: str):
    taken = set(model.constants) | set(model.formulas)
    for m in model.modules:
        taken |= {v.name for v in m.variables}
    if name in taken:
        raise GclValidationError(f"duplicate declaration of {name!r}")


def _const_int(e: Expr, model: SymbolicModel, as_bool: bool = False) -> int:
    env = _const_env(model)
    try:
        v = ex.const_eval(e, env)
    except GclTypeError as err:
        raise GclValidationError(f"expected a constant expression: {err}") from err
    if as_bool:
        if not isinstance(v, bool):
            raise GclValidationError(f"expected a boolean constant, got {v!r}")
        return int(v)
    if isinstance(v, bool) or (isinstance(v, Fraction) and v.denominator != 1):
        raise GclValidationError(f"expected an integer constant, got {v!r}")
    return int(v)


def _const_env(model: SymbolicModel) -> dict:
    env = {}
    for name, (_, e) in model.constants.items():
        env[name] = ex.const_eval(e, env)
    return env


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_model(model: SymbolicModel):
    """Type-check the model and verify probability/ownership invariants."""
    # constants: evaluate in declaration order, check declared types
    env_vals = {}
    types: dict = {}
    for name, (ctype, e) in model.constants.items():
        t = ex.type_of(e, types)
        if ctype == INT and t != INT:
            raise GclValidationError(f"const int {name!r} bound to a {t} expression")
        if ctype == BOOL and t != BOOL:
            raise GclValidationError(f"const bool {name!r} bound to a {t} expression")
        if ctype == DOUBLE and t == BOOL:
            raise GclValidationError(f"const double {name!r} bound to a boolean")
        types[name] = ctype
        env_vals[name] = ex.const_eval(e, env_vals)
    model.const_values = env_vals

    # variables
    var_names = set()
    for m in model.modules:
        for v in m.variables:
            if v.name in var_names:
                raise GclValidationError(f"duplicate variable {v.name!r}")
            var_names.add(v.name)
            types[v.name] = BOOL if v.is_bool else INT

    # formulas: topological order, cycle detection, then typing
    order: list = []
    state = {}  # name -> 0 visiting, 1 done

    def visit(name: str, chain: tuple):
        if state.get(name) == 1:
            return
        if state.get(name) == 0:
            cyc = " -> ".join(chain + (name,))
            raise GclValidationError(f"cyclic formula definition: {cyc}")
        state[name] = 0
        for dep in sorted(ex.free_names(model.formulas[name])):
            if dep in model.formulas:
                visit(dep, chain + (name,))
        state[name] = 1
        order.append(name)

    for name in model.formulas:
        visit(name, ())
    model.formula_order = order
    for name in order:
        types[name] = ex.type_of(model.formulas[name], types)
    model.types = types

    # commands
    for m in model.modules:
        own = {v.name for v in m.variables}
        for ci, cmd in enumerate(m.commands):
            where = f"module {m.name!r}, command {ci + 1}"
            if ex.type_of(cmd.guard, types) != BOOL:
                raise GclValidationError(f"{where}: guard is not boolean")
            total = Fraction(0)
            for up in cmd.updates:
                if up.prob is not None:
                    p = _prob_value(up.prob, env_vals, where)
                else:
                    p = Fraction(1)
                total += p
                seen = set()
                for name, rhs in up.assignments:
                    if name not in own:
                        if name in var_names:
                            raise GclValidationError(
                                f"{where}: assigns variable {name!r} of another module")
                        raise GclValidationError(
                            f"{where}: assigns undeclared variable {name!r}")
                    if name in seen:
                        raise GclValidationError(
                            f"{where}: assigns {name!r} twice in one update")
                    seen.add(name)
                    vt = types[name]
                    rt = ex.type_of(rhs, types)
                    if vt == BOOL and rt != BOOL:
                        raise GclValidationError(
                            f"{where}: boolean variable {name!r} assigned a {rt} value")
                    if vt == INT and rt != INT:
                        raise GclValidationError(
                            f"{where}: integer variable {name!r} assigned a {rt} value"
                            " (use floor/ceil/round)")
            if total != 1:
                raise GclValidationError(
                    f"{where}: probabilities sum to {_fmt_fraction(total)}")

    # labels and rewards
    for name, e in model.labels.items():
        if ex.type_of(e, types) != BOOL:
            raise GclValidationError(f"label {name!r} is not boolean")
    actions = {c.action for m in model.modules for c in m.commands if c.action}
    for rname, items in model.rewards.items():
        for item in items:
            if ex.type_of(item.guard, types) != BOOL:
                raise GclValidationError(
                    f"rewards {rname!r}: guard is not boolean")
            if ex.type_of(item.value, types) == BOOL:
                raise GclValidationError(
                    f"rewards {rname!r}: value is boolean")
            if item.action not in (None, "") and item.action not in actions:
                raise GclValidationError(
                    f"rewards {rname!r}: unknown action {item.action!r}")


def _prob_value(e: Expr, env_vals: dict, where: str) -> Fraction:
    try:
        v = ex.const_eval(e, env_vals)
    except GclTypeError as err:
        raise GclValidationError(
            f"{where}: probability must be a constant expression ({err})") from err
    if isinstance(v, bool) or isinstance(v, float):
        raise GclValidationError(
            f"{where}: probability must be an exact rational, got {v!r}")
    v = Fraction(v)
    if not 0 <= v <= 1:
        raise GclValidationError(
            f"{where}: probability {_fmt_fraction(v)} outside [0,1]")
    return v


def _fmt_fraction(f: Fraction) -> str:
    if f.denominator == 1:
        return str(f.numerator)
    fl = float(f)
    if Fraction(str(fl)) == f:
        return str(fl)
    return f"{f.numerator}/{f.denominator}"


# ---------------------------------------------------------------------------
# Compilation of a validated model to Python functions
# ---------------------------------------------------------------------------

class CompiledModel:
    """Executable form of a model: successor/label/reward evaluators."""

    def __init__(self, model: SymbolicModel):
        self.model = model
        self.var_decls = model.variables()
        self.var_names = [v.name for v in self.var_decls]
        self.var_index = {n: i for i, n in enumerate(self.var_names)}
        self.initial = tuple(v.init for v in self.var_decls)
        self.lo = tuple(v.lo for v in self.var_decls)
        self.hi = tuple(v.hi for v in self.var_decls)
        # stable action indexing in declaration order
        self.action_names: list = []
        seen = set()
        for m in model.modules:
            for c in m.commands:
                if c.action and c.action not in seen:
                    seen.add(c.action)
                    self.action_names.append(c.action)
        self.label_names = list(model.labels)
        self.reward_names = list(model.rewards)
        src = self._generate_source()
        self.source = src
        namespace: dict = dict(ex.EVAL_GLOBALS)
        exec(compile(src, "<gcl-model>", "exec"), namespace)
        self.successors = namespace["successors"]
        self.state_info = namespace["state_info"]
        self.trans_reward = namespace["trans_reward"]

    # -- codegen ------------------------------------------------------------

    def _rename(self, name: str) -> str:
        model = self.model
        if name in self.var_index:
            return f"v_{name}"
        if name in model.formulas:
            return f"f_{name}"
        if name in model.const_values:
            v = model.const_values[name]
            if isinstance(v, bool):
                return "True" if v else "False"
            if isinstance(v, Fraction):
                return str(int(v)) if v.denominator == 1 else repr(float(v))
            return repr(v)
        raise GclValidationError(f"undeclared identifier {name!r}")

    def _py(self, e: Expr) -> str:
        return ex.to_python(e, self._rename)

    def _unpack_line(self) -> str:
        if len(self.var_names) == 1:
            return f"    (v_{self.var_names[0]},) = state"
        return "    (" + ", ".join(f"v_{n}" for n in self.var_names) + ") = state"

    def _formula_lines(self, needed: set) -> list:
        lines = []
        for name in self.model.formula_order:
            if name in needed:
                lines.append(f"    f_{name} = {self._py(self.model.formulas[name])}")
        return lines

    def _formula_closure(self, roots: set) -> set:
        """All formulas transitively needed to evaluate `roots`."""
        needed: set = set()
        stack = [n for n in roots if n in self.model.formulas]
        while stack:
            n = stack.pop()
            if n in needed:
                continue
            needed.add(n)
            for dep in ex.free_names(self.model.formulas[n]):
                if dep in self.model.formulas and dep not in needed:
                    stack.append(dep)
        return needed

    def _update_distribution(self, cmd: Command) -> list:
        """A command's updates as (prob float, assignment pairs) with
        zero-probability branches dropped; probabilities come from the
        validated exact rationals."""
        out = []
        for up in cmd.updates:
            p = Fraction(1) if up.prob is None else ex.const_eval(
                up.prob, self.model.const_values)
            if p == 0:
                continue
            out.append((float(p), tuple(
                (self.var_index[name], self._py(rhs))
                for name, rhs in up.assignments)))
        return out

    @staticmethod
    def _branches_src(branches: list) -> str:
        parts = []
        for p, assigns in branches:
            body = ", ".join(f"({vi}, {rhs})" for vi, rhs in assigns)
            if len(assigns) == 1:
                body += ","
            parts.append(f"({p!r}, ({body}))")
        if len(parts) == 1:
            return f"({parts[0]},)"
        return "(" + ", ".join(parts) + ")"

    def _split_guard(self, guard: Expr):
        """(cheap prefix conjuncts, residual conjuncts): the prefix is the
        leading run of conjuncts that reference no formulas, usable as a
        gate before formula evaluation."""
        conjuncts: list = []

        def flatten(e: Expr):
            if isinstance(e, ex.Binary) and e.op == "&":
                flatten(e.left)
                flatten(e.right)
            else:
                conjuncts.append(e)

        flatten(guard)
        prefix: list = []
        for i, c in enumerate(conjuncts):
            if any(n in self.model.formulas for n in ex.free_names(c)):
                return prefix, conjuncts[i:]
            prefix.append(c)
        return prefix, []

    def _conj_src(self, conjuncts: list) -> str:
        if not conjuncts:
            return "True"
        return " and ".join(self._py(c) for c in conjuncts)

    def _generate_source(self) -> str:
        """Successor-function source.

        Layout: formulas are computed under guard conditions built from the
        referencing commands' formula-free guard prefixes, so states where no
        formula-dependent command can fire skip formula evaluation entirely.
        Synchronized actions with one enabled-candidate command per module
        collapse to a single static product distribution.
        """
        model = self.model
        L: list = []

        # -- collect groups: one per unlabeled command, one per action ------
        # each group: (kind, prefix_src, emit payload, formula roots)
        groups: list = []
        for m in model.modules:
            for c in m.commands:
                if c.action is not None:
                    continue
                prefix, residual = self._split_guard(c.guard)
                roots = ex.free_names(c.guard)
                for up in c.updates:
                    for _, rhs in up.assignments:
                        roots |= ex.free_names(rhs)
                groups.append(("cmd", self._conj_src(prefix),
                               (c, residual), roots))
        for ai, action in enumerate(self.action_names):
            participating = []
            for m in model.modules:
                cmds = c_list(m, action)
                if cmds:
                    participating.append((m, cmds))
            roots: set = set()
            prefix_parts: list = []
            for m, cmds in participating:
                module_prefixes = []
                for c in cmds:
                    prefix, _ = self._split_guard(c.guard)
                    module_prefixes.append(self._conj_src(prefix))
                    roots |= ex.free_names(c.guard)
                    for up in c.updates:
                        for _, rhs in up.assignments:
                            roots |= ex.free_names(rhs)
                if len(module_prefixes) == 1:
                    part = module_prefixes[0]
                else:
                    part = "(" + " or ".join(f"({p})" for p in module_prefixes) + ")"
                if part != "True":
                    prefix_parts.append(part)
            prefix_src = " and ".join(prefix_parts) if prefix_parts else "True"
            groups.append(("action", prefix_src, (ai, action, participating),
                           roots))

        # -- formula gating conditions --------------------------------------
        # cond(f) = OR of the prefixes of all groups whose guards/updates
        # need f (transitively); a group's residual only evaluates after its
        # own prefix, so every reference is guarded.
        formula_conds: dict = {name: [] for name in model.formulas}
        for kind, prefix_src, payload, roots in groups:
            for name in self._formula_closure(roots):
                formula_conds[name].append(prefix_src)

        L.append("def successors(state):")
        L.append(self._unpack_line())
        emitted_cond = None
        for name in model.formula_order:
            conds = formula_conds[name]
            if not conds:
                continue
            if "True" in conds:
                cond = "True"
            else:
                uniq = sorted(set(conds))
                cond = " or ".join(f"({c})" for c in uniq)
            rhs = self._py(model.formulas[name])
            if cond == "True":
                L.append(f"    f_{name} = {rhs}")
                emitted_cond = None
            elif cond == emitted_cond:
                L.append(f"        f_{name} = {rhs}")
            else:
                L.append(f"    if {cond}:")
                L.append(f"        f_{name} = {rhs}")
                emitted_cond = cond
        L.append("    res = []")

        for kind, prefix_src, payload, _roots in groups:
            if kind == "cmd":
                c, residual = payload
                cond = prefix_src
                if residual:
                    res_src = self._conj_src(residual)
                    cond = f"{cond} and {res_src}" if cond != "True" else res_src
                branches = self._branches_src(self._update_distribution(c))
                L.append(f"    if {cond}:")
                L.append(f"        res.append((-1, {branches}))")
                continue
            ai, action, participating = payload
            L.append(f"    # action {action!r}")
            if all(len(cmds) == 1 for _, cmds in participating):
                conds = [] if prefix_src == "True" else [prefix_src]
                dists = []
                for m, cmds in participating:
                    _, residual = self._split_guard(cmds[0].guard)
                    if residual:
                        conds.append(self._conj_src(residual))
                    dists.append(self._update_distribution(cmds[0]))
                merged = [(1.0, ())]
                for dist in dists:
                    merged = [(p0 * p1, a0 + a1)
                              for p0, a0 in merged for p1, a1 in dist]
                cond = " and ".join(conds) if conds else "True"
                L.append(f"    if {cond}:")
                L.append(f"        res.append(({ai}, {self._branches_src(merged)}))")
                continue
            # general case: several candidate commands in some module
            L.append(f"    if {prefix_src}:" if prefix_src != "True"
                     else "    if True:")
            set_names = []
            for k, (m, cmds) in enumerate(participating):
                sname = f"_a{ai}_{k}"
                set_names.append(sname)
                L.append(f"        {sname} = []")
                for c in cmds:
                    branches = self._branches_src(self._update_distribution(c))
                    L.append(f"        if {self._py(c.guard)}:")
                    L.append(f"            {sname}.append({branches})")
            cond = " and ".join(set_names)
            if len(set_names) == 1:
                L.append(f"        if {cond}:")
                L.append(f"            for _b in {set_names[0]}:")
                L.append(f"                res.append(({ai}, _b))")
            else:
                L.append(f"        if {cond}:")
                ind = "            "
                for k, sname in enumerate(set_names):
                    L.append(f"{ind}for _b{k} in {sname}:")
                    ind += "    "
                L.append(f"{ind}_acc = []")
                ind2 = ind
                for k in range(len(set_names)):
                    L.append(f"{ind2}for _p{k}, _u{k} in _b{k}:")
                    ind2 += "    "
                probs = " * ".join(f"_p{k}" for k in range(len(set_names)))
                ups = " + ".join(f"_u{k}" for k in range(len(set_names)))
                L.append(f"{ind2}_acc.append(({probs}, {ups}))")
                L.append(f"{ind}res.append(({ai}, tuple(_acc)))")
        L.append("    return res")
        L.append("")

        # state labels and state rewards
        label_roots: set = set()
        for e in model.labels.values():
            label_roots |= ex.free_names(e)
        for items in model.rewards.values():
            for item in items:
                if item.action is None:
                    label_roots |= ex.free_names(item.guard)
                    label_roots |= ex.free_names(item.value)
        needed = self._formula_closure(label_roots)
        L.append("def state_info(state):")
        L.append(self._unpack_line())
        L.extend(self._formula_lines(needed))
        labels = ", ".join(self._py(e) for e in model.labels.values())
        if len(model.labels) == 1:
            labels += ","
        L.append(f"    _labels = ({labels})")
        rews = []
        for rname in self.reward_names:
            terms = [f"({self._py(i.value)} if {self._py(i.guard)} else 0.0)"
                     for i in model.rewards[rname] if i.action is None]
            rews.append(" + ".join(terms) if terms else "0.0")
        joined = ", ".join(rews)
        if len(rews) == 1:
            joined += ","
        L.append(f"    _rews = ({joined})")
        L.append("    return _labels, _rews")
        L.append("")

        # transition rewards, keyed by action index (-1 for unlabeled)
        trans_roots: set = set()
        for items in model.rewards.values():
            for item in items:
                if item.action is not None:
                    trans_roots |= ex.free_names(item.guard)
                    trans_roots |= ex.free_names(item.value)
        needed = self._formula_closure(trans_roots)
        L.append("def trans_reward(state, action):")
        L.append(self._unpack_line())
        L.extend(self._formula_lines(needed))
        action_idx = {a: i for i, a in enumerate(self.action_names)}
        rews = []
        for rname in self.reward_names:
            terms = []
            for item in model.rewards[rname]:
                if item.action is None:
                    continue
                ai = -1 if item.action == "" else action_idx[item.action]
                terms.append(f"(({self._py(item.value)}) if action == {ai}"
                             f" and {self._py(item.guard)} else 0.0)")
            rews.append(" + ".join(terms) if terms else "0.0")
        joined = ", ".join(rews)
        if len(rews) == 1:
            joined += ","
        L.append(f"    return ({joined})")
        L.append("")
        return "\n".join(L)


def c_list(m: ModuleDef, action: str) -> list:
    return [c for c in m.commands if c.action == action]


# ---------------------------------------------------------------------------
# Exploration
# ---------------------------------------------------------------------------

@dataclass
class BuildOptions:
    fix_deadlocks: bool = False
    state_cap: int = 5_000_000


def compose_and_build(model: SymbolicModel, options: Optional[BuildOptions] = None) -> Dtmc:
    """Explore the model breadth-first and return the explicit DTMC.

    Simultaneously enabled commands / synchronization sets are combined by
    uniform scheduling (weight 1/k each) so the result is always a DTMC.
    """
    opts = options or BuildOptions()
    cm = CompiledModel(model)
    nvars = len(cm.var_names)
    lo, hi = cm.lo, cm.hi
    has_trans_rewards = any(
        item.action is not None
        for items in model.rewards.values() for item in items)
    n_rew = len(cm.reward_names)

    index: dict = {cm.initial: 0}
    frontier = deque([cm.initial])
    order = [cm.initial]
    rows: list = []          # per state: list of (dst, prob, action, rew tuple)

    successors = cm.successors
    trans_reward = cm.trans_reward
    zeros = (0.0,) * n_rew

    while frontier:
        state = frontier.popleft()
        alts = successors(state)
        if not alts:
            if not opts.fix_deadlocks:
                raise DeadlockError(
                    "deadlock in state " + _fmt_state(cm, state)
                    + "; no command enabled (set fix_deadlocks to self-loop)")
            rows.append([(index[state], 1.0, -1, zeros)])
            continue
        w = 1.0 / len(alts)
        dist: dict = {}
        for action, branches in alts:
            if has_trans_rewards:
                arew = trans_reward(state, action)
            else:
                arew = zeros
            for p, assigns in branches:
                nxt = list(state)
                for vi, val in assigns:
                    nxt[vi] = val
                for vi in range(nvars):
                    v = nxt[vi]
                    if v < lo[vi] or v > hi[vi]:
                        raise DomainError(
                            f"update drives {cm.var_names[vi]!r} to {v}, outside "
                            f"[{lo[vi]}..{hi[vi]}], in state " + _fmt_state(cm, state))
                succ = tuple(nxt)
                si = index.get(succ)
                if si is None:
                    si = len(index)
                    if si >= opts.state_cap:
                        raise StateCapError(
                            f"state count exceeded cap of {opts.state_cap}")
                    index[succ] = si
                    frontier.append(succ)
                    order.append(succ)
                wp = w * p
                entry = dist.get(si)
                if entry is None:
                    dist[si] = [wp, action, tuple(wp * r for r in arew)]
                else:
                    entry[0] += wp
                    if entry[1] != action:
                        entry[1] = -2      # mixed actions on a merged edge
                    entry[2] = tuple(a + wp * r for a, r in zip(entry[2], arew))
        rows.append([(si, e[0], e[1], e[2]) for si, e in sorted(dist.items())])

    return _assemble(cm, order, rows)


def _fmt_state(cm: CompiledModel, state: tuple) -> str:
    return "(" + ", ".join(f"{n}={v}" for n, v in zip(cm.var_names, state)) + ")"


def _assemble(cm: CompiledModel, order: list, rows: list) -> Dtmc:
    n = len(order)
    n_edges = sum(len(r) for r in rows)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices = np.zeros(n_edges, dtype=np.int64)
    probs = np.zeros(n_edges, dtype=np.float64)
    actions = np.full(n_edges, -1, dtype=np.int32)
    n_rew = len(cm.reward_names)
    trans_rew = np.zeros((n_rew, n_edges), dtype=np.float64)
    k = 0
    for i, row in enumerate(rows):
        for dst, p, act, rew in row:
            indices[k] = dst
            probs[k] = p
            actions[k] = act
            for ri in range(n_rew):
                trans_rew[ri, k] = rew[ri] / p
            k += 1
        indptr[i + 1] = k

    valuations = np.array(order, dtype=np.int64).reshape(n, len(cm.var_names))
    label_masks = {name: np.zeros(n, dtype=bool) for name in cm.label_names}
    state_rew = np.zeros((n_rew, n), dtype=np.float64)
    state_info = cm.state_info
    for i, state in enumerate(order):
        labs, rews = state_info(state)
        for li, name in enumerate(cm.label_names):
            if labs[li]:
                label_masks[name][i] = True
        for ri in range(n_rew):
            state_rew[ri, i] = rews[ri]

    rewards = {}
    for ri, name in enumerate(cm.reward_names):
        sr = state_rew[ri]
        tr = trans_rew[ri]
        if np.any(sr < 0) or np.any(tr < 0):
            raise GclValidationError(f"rewards {name!r}: negative reward value")
        rewards[name] = RewardStructure(
            name=name,
            state_rewards=sr if sr.any() else None,
            trans_rewards=tr if tr.any() else None,
        )

    return Dtmc(
        n_states=n,
        initial=0,
        indptr=indptr,
        indices=indices,
        probs=probs,
        labels=label_masks,
        rewards=rewards,
        var_names=list(cm.var_names),
        valuations=valuations,
        action_names=list(cm.action_names),
        edge_actions=actions if len(cm.action_names) else None,
    )
