"""Explicit-state DTMC representation.

States are dense indices; transitions are stored in compressed sparse row
form (the checker iterates row-wise).  Labels are boolean masks over states,
reward structures carry optional per-state and per-edge values.  Instances
are immutable by convention after construction.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

ROW_SUM_TOL = 1e-9


class DtmcFormatError(ValueError):
    """Malformed explicit-state text, with a line diagnostic."""

    def __init__(self, message: str, line: int = -1):
        if line >= 0:
            message = f"{message} (line {line})"
        super().__init__(message)


@dataclass
class RewardStructure:
    """Nonnegative rewards: per-state vector and/or per-edge (CSR-aligned)."""
    name: str
    state_rewards: Optional[np.ndarray] = None   # shape (n_states,)
    trans_rewards: Optional[np.ndarray] = None   # aligned with Dtmc.probs

    def validate(self, n_states: int, n_edges: int):
        for arr, expect, kind in ((self.state_rewards, n_states, "state"),
                                  (self.trans_rewards, n_edges, "transition")):
            if arr is None:
                continue
            if arr.shape != (expect,):
                raise ValueError(
                    f"reward {self.name!r}: {kind} array has shape {arr.shape}, "
                    f"expected ({expect},)")
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(
                    f"reward {self.name!r}: {kind} rewards must be finite and >= 0")


StateSetLike = Union[np.ndarray, Iterable[int]]


def as_state_mask(states: StateSetLike, n_states: int) -> np.ndarray:
    """Normalize an index iterable or boolean mask to a boolean mask."""
    if isinstance(states, np.ndarray) and states.dtype == bool:
        if states.shape != (n_states,):
            raise ValueError(f"mask has shape {states.shape}, expected ({n_states},)")
        return states
    mask = np.zeros(n_states, dtype=bool)
    for s in states:
        if not 0 <= s < n_states:
            raise ValueError(f"state index {s} out of range")
        mask[s] = True
    return mask


@dataclass
class Dtmc:
    n_states: int
    initial: int
    indptr: np.ndarray                 # int64, shape (n_states+1,)
    indices: np.ndarray                # int64, destination per edge
    probs: np.ndarray                  # float64 per edge, in (0,1]
    labels: dict = field(default_factory=dict)     # name -> bool mask
    rewards: dict = field(default_factory=dict)    # name -> RewardStructure
    var_names: list = field(default_factory=list)
    valuations: Optional[np.ndarray] = None        # int64 (n_states, n_vars)
    action_names: list = field(default_factory=list)
    edge_actions: Optional[np.ndarray] = None      # int32 per edge, -1 none

    @property
    def n_transitions(self) -> int:
        return int(self.indices.size)

    def row(self, s: int):
        """Successor (indices, probs) slices of state s."""
        a, b = self.indptr[s], self.indptr[s + 1]
        return self.indices[a:b], self.probs[a:b]

    def label_mask(self, name: str) -> np.ndarray:
        if name not in self.labels:
            raise KeyError(f"unknown label {name!r}")
        return self.labels[name]

    def action_of_edge(self, k: int) -> Optional[str]:
        if self.edge_actions is None:
            return None
        a = int(self.edge_actions[k])
        if a == -1:
            return None
        if a == -2:
            return "(merged)"
        return self.action_names[a]

    def is_absorbing(self, s: int) -> bool:
        dst, p = self.row(s)
        return dst.size == 1 and dst[0] == s and p[0] == 1.0

    def transition_matrix(self):
        """The row-stochastic matrix as scipy CSR (built on demand)."""
        from scipy.sparse import csr_matrix
        return csr_matrix((self.probs, self.indices, self.indptr),
                          shape=(self.n_states, self.n_states))


# ---------------------------------------------------------------------------
# Validation and reachability
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    row_sum_violations: list = field(default_factory=list)   # (state, sum)
    bad_probabilities: list = field(default_factory=list)    # (state, dst, p)
    unreachable: list = field(default_factory=list)          # state indices
    dangling_labels: list = field(default_factory=list)      # names of empty labels

    @property
    def ok(self) -> bool:
        return not (self.row_sum_violations or self.bad_probabilities)

    def lines(self) -> list:
        out = []
        for s, total in self.row_sum_violations:
            out.append(f"state {s}: row sums to {total!r}")
        for s, d, p in self.bad_probabilities:
            out.append(f"edge {s}->{d}: probability {p!r} outside (0,1]")
        if self.unreachable:
            out.append(f"unreachable states: {self.unreachable}")
        for name in self.dangling_labels:
            out.append(f"label {name!r} marks no states")
        return out


def validate(d: Dtmc) -> ValidationReport:
    """Report-only structural check: row sums, probability range,
    unreachable states and labels that mark no states."""
    report = ValidationReport()
    sums = np.add.reduceat(d.probs, d.indptr[:-1]) if d.n_transitions else \
        np.zeros(d.n_states)
    empty_rows = d.indptr[1:] == d.indptr[:-1]
    sums = np.where(empty_rows, 0.0, sums)
    for s in np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]:
        report.row_sum_violations.append((int(s), float(sums[s])))
    bad = (d.probs <= 0) | (d.probs > 1)
    for k in np.nonzero(bad)[0]:
        src = int(np.searchsorted(d.indptr, k, side="right") - 1)
        report.bad_probabilities.append((src, int(d.indices[k]), float(d.probs[k])))
    reach = reachable_from(d, d.initial)
    report.unreachable = [int(s) for s in np.nonzero(~reach)[0]]
    for name, mask in d.labels.items():
        if not mask.any():
            report.dangling_labels.append(name)
    return report


def reachable_from(d: Dtmc, start: int) -> np.ndarray:
    """Forward-reachable set from `start` over positive-probability edges."""
    if not 0 <= start < d.n_states:
        raise ValueError(f"start state {start} out of range")
    seen = np.zeros(d.n_states, dtype=bool)
    seen[start] = True
    queue = deque([start])
    indptr, indices = d.indptr, d.indices
    while queue:
        s = queue.popleft()
        for t in indices[indptr[s]:indptr[s + 1]]:
            if not seen[t]:
                seen[t] = True
                queue.append(int(t))
    return seen


# ---------------------------------------------------------------------------
# Text serialization
# ---------------------------------------------------------------------------

def serialize(d: Dtmc) -> str:
    """Explicit-state text form; see README for the grammar.

    Probabilities and rewards are written with repr() so they round-trip to
    full double precision.
    """
    out = [f"dtmc {d.n_states} {d.initial}"]
    for s in range(d.n_states):
        a, b = d.indptr[s], d.indptr[s + 1]
        for k in range(a, b):
            line = f"{s} {int(d.indices[k])} {float(d.probs[k])!r}"
            act = d.action_of_edge(int(k))
            if act is not None and act != "(merged)":
                line += f" {act}"
            out.append(line)
    for name in d.labels:
        idx = " ".join(str(int(i)) for i in np.nonzero(d.labels[name])[0])
        out.append(f"label {name}: {idx}".rstrip())
    for name, rs in d.rewards.items():
        if rs.state_rewards is not None:
            for s in np.nonzero(rs.state_rewards)[0]:
                out.append(f"reward {name} state {int(s)} "
                           f"{float(rs.state_rewards[s])!r}")
        if rs.trans_rewards is not None:
            for k in np.nonzero(rs.trans_rewards)[0]:
                src = int(np.searchsorted(d.indptr, k, side="right") - 1)
                out.append(f"reward {name} trans {src} {int(d.indices[k])} "
                           f"{float(rs.trans_rewards[k])!r}")
    if d.valuations is not None and d.var_names:
        out.append("vars " + " ".join(d.var_names))
        for s in range(d.n_states):
            row = " ".join(str(int(v)) for v in d.valuations[s])
            out.append(f"valuation {s} {row}")
    return "\n".join(out) + "\n"


def deserialize(text: str) -> Dtmc:
    lines = text.splitlines()
    if not lines:
        raise DtmcFormatError("empty input")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "dtmc":
        raise DtmcFormatError("expected header 'dtmc <n_states> <initial>'", 1)
    try:
        n, initial = int(head[1]), int(head[2])
    except ValueError as err:
        raise DtmcFormatError(f"bad header: {err}", 1) from err
    if n <= 0 or not 0 <= initial < n:
        raise DtmcFormatError("initial state out of range", 1)

    edges: dict = {}
    edge_order: list = []
    labels: dict = {}
    reward_state: dict = {}
    reward_trans: dict = {}
    var_names: list = []
    valuation_rows: dict = {}
    action_set: dict = {}

    def parse_state(tok: str, lineno: int) -> int:
        try:
            v = int(tok)
        except ValueError as err:
            raise DtmcFormatError(f"bad state index {tok!r}", lineno) from err
        if not 0 <= v < n:
            raise DtmcFormatError(f"state index {v} out of range", lineno)
        return v

    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "label":
            if ":" not in line:
                raise DtmcFormatError("label line missing ':'", lineno)
            name = line.split(":", 1)[0].split()[1]
            rest = line.split(":", 1)[1].split()
            mask = np.zeros(n, dtype=bool)
            for tok in rest:
                mask[parse_state(tok, lineno)] = True
            labels[name] = mask
        elif parts[0] == "reward":
            if len(parts) < 5:
                raise DtmcFormatError("short reward line", lineno)
            name, kind = parts[1], parts[2]
            if kind == "state":
                if len(parts) != 5:
                    raise DtmcFormatError("reward state line needs 5 fields", lineno)
                s = parse_state(parts[3], lineno)
                reward_state.setdefault(name, {})[s] = _parse_float(parts[4], lineno)
            elif kind == "trans":
                if len(parts) != 6:
                    raise DtmcFormatError("reward trans line needs 6 fields", lineno)
                s = parse_state(parts[3], lineno)
                t = parse_state(parts[4], lineno)
                reward_trans.setdefault(name, {})[(s, t)] = _parse_float(parts[5], lineno)
            else:
                raise DtmcFormatError(f"unknown reward kind {kind!r}", lineno)
        elif parts[0] == "vars":
            var_names = parts[1:]
        elif parts[0] == "valuation":
            if len(parts) < 2:
                raise DtmcFormatError("short valuation line", lineno)
            s = parse_state(parts[1], lineno)
            valuation_rows[s] = [int(tok) for tok in parts[2:]]
        else:
            if len(parts) not in (3, 4):
                raise DtmcFormatError(
                    f"expected '<src> <dst> <prob> [action]', got {line!r}", lineno)
            s = parse_state(parts[0], lineno)
            t = parse_state(parts[1], lineno)
            p = _parse_float(parts[2], lineno)
            if not 0 < p <= 1:
                raise DtmcFormatError(f"probability {p!r} outside (0,1]", lineno)
            if (s, t) in edges:
                raise DtmcFormatError(f"duplicate edge {s}->{t}", lineno)
            edges[(s, t)] = p
            edge_order.append((s, t))
            if len(parts) == 4:
                action_set[(s, t)] = parts[3]

    # assemble CSR, preserving per-source order of appearance
    per_src: list = [[] for _ in range(n)]
    for (s, t) in edge_order:
        per_src[s].append(t)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices = np.zeros(len(edge_order), dtype=np.int64)
    probs = np.zeros(len(edge_order), dtype=np.float64)
    action_names: list = []
    action_idx: dict = {}
    edge_actions = np.full(len(edge_order), -1, dtype=np.int32)
    k = 0
    edge_pos: dict = {}
    for s in range(n):
        if not per_src[s]:
            raise DtmcFormatError(f"state {s} has no outgoing transitions")
        total = 0.0
        for t in per_src[s]:
            p = edges[(s, t)]
            indices[k] = t
            probs[k] = p
            total += p
            edge_pos[(s, t)] = k
            act = action_set.get((s, t))
            if act is not None:
                if act not in action_idx:
                    action_idx[act] = len(action_names)
                    action_names.append(act)
                edge_actions[k] = action_idx[act]
            k += 1
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise DtmcFormatError(f"state {s}: row sums to {total!r}")
        indptr[s + 1] = k

    rewards = {}
    for name in sorted(set(reward_state) | set(reward_trans)):
        sr = None
        if name in reward_state:
            sr = np.zeros(n, dtype=np.float64)
            for s, v in reward_state[name].items():
                sr[s] = v
        tr = None
        if name in reward_trans:
            tr = np.zeros(len(edge_order), dtype=np.float64)
            for (s, t), v in reward_trans[name].items():
                if (s, t) not in edge_pos:
                    raise DtmcFormatError(
                        f"reward {name!r} on nonexistent edge {s}->{t}")
                tr[edge_pos[(s, t)]] = v
        rs = RewardStructure(name, sr, tr)
        rs.validate(n, len(edge_order))
        rewards[name] = rs

    valuations = None
    if valuation_rows:
        width = len(next(iter(valuation_rows.values())))
        if var_names and len(var_names) != width:
            raise DtmcFormatError("vars/valuation width mismatch")
        valuations = np.zeros((n, width), dtype=np.int64)
        for s in range(n):
            if s not in valuation_rows:
                raise DtmcFormatError(f"missing valuation for state {s}")
            if len(valuation_rows[s]) != width:
                raise DtmcFormatError(f"valuation width mismatch at state {s}")
            valuations[s] = valuation_rows[s]

    return Dtmc(
        n_states=n, initial=initial, indptr=indptr, indices=indices,
        probs=probs, labels=labels, rewards=rewards,
        var_names=var_names, valuations=valuations,
        action_names=action_names,
        edge_actions=edge_actions if action_names else None,
    )


def _parse_float(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError as err:
        raise DtmcFormatError(f"bad number {tok!r}", lineno) from err
