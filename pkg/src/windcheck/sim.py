"""Monte Carlo path simulation over explicit DTMCs.

Randomness comes from the counter-based Philox generator (numpy's
``np.random.Philox``), seeded through ``SeedSequence(seed, spawn_key=(worker,))``
so traces replay bit-identically across platforms and worker counts.  Each
simulation step consumes exactly one uniform double, drawn sequentially
across the traces of a worker.  Successors are sampled by inverse CDF over
the state's transition row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dtmc import Dtmc
from .solver import njit

Z_95 = 1.959963984540054          # two-sided 95% normal quantile

_CHUNK = 1 << 20                  # uniforms drawn per refill


@dataclass
class TraceStep:
    step: int
    state: int
    action: Optional[str]         # action leaving this state; None on the last row
    valuation: dict
    accumulated: dict             # reward name -> value accumulated on arrival


@dataclass
class Trace:
    steps: list
    terminal: str                 # matching stop label, 'absorbed', or 'cap'
    seed: int

    def final_accumulated(self) -> dict:
        return self.steps[-1].accumulated if self.steps else {}


@dataclass
class Estimate:
    mean: float
    half_width: float             # 95% normal-approximation CI half width
    n_samples: int
    seed: int
    truncated: int = 0            # traces that hit the step cap

    @property
    def degenerate(self) -> bool:
        return self.n_samples < 2


def _absorbing_mask(d: Dtmc) -> np.ndarray:
    mask = np.zeros(d.n_states, dtype=bool)
    for s in range(d.n_states):
        dst, p = d.row(s)
        if dst.size == 1 and dst[0] == s and p[0] >= 1.0:
            mask[s] = True
    return mask


def _reward_arrays(d: Dtmc, names: Sequence[str]):
    k = len(names)
    sr = np.zeros((k, d.n_states), dtype=np.float64)
    tr = np.zeros((k, d.n_transitions), dtype=np.float64)
    for i, name in enumerate(names):
        if name not in d.rewards:
            raise KeyError(f"unknown reward structure {name!r}")
        rs = d.rewards[name]
        if rs.state_rewards is not None:
            sr[i] = rs.state_rewards
        if rs.trans_rewards is not None:
            tr[i] = rs.trans_rewards
    return sr, tr


@njit(cache=True)
def _run_batch(indptr, indices, probs, absorbing, target, sr, tr, init,
               step_cap, u, u_pos, trace_idx, cur, cur_acc,
               out_state, out_steps, out_hit, out_acc, out_capped):
    """Advance traces until the uniform buffer runs out.

    Returns (next trace index, uniform cursor, resume flag).  The running
    (state, steps, hit) of the in-flight trace lives in `cur` so a trace can
    straddle buffer refills.
    """
    n_traces = out_state.size
    n_rew = sr.shape[0]
    s = cur[0]
    steps = cur[1]
    hit = cur[2]
    while trace_idx < n_traces:
        while True:
            if hit == 0 and target[s]:
                hit = 1
                for ri in range(n_rew):
                    out_acc[ri, trace_idx] = cur_acc[ri]
            if absorbing[s] or steps >= step_cap:
                out_state[trace_idx] = s
                out_steps[trace_idx] = steps
                out_hit[trace_idx] = hit
                out_capped[trace_idx] = 0 if absorbing[s] else 1
                if hit == 0:
                    for ri in range(n_rew):
                        out_acc[ri, trace_idx] = cur_acc[ri]
                break
            if u_pos >= u.size:
                cur[0] = s
                cur[1] = steps
                cur[2] = hit
                return trace_idx, u_pos, 1
            x = u[u_pos]
            u_pos += 1
            a, b = indptr[s], indptr[s + 1]
            k = b - 1
            cum = 0.0
            for j in range(a, b):
                cum += probs[j]
                if x < cum:
                    k = j
                    break
            for ri in range(n_rew):
                cur_acc[ri] += sr[ri, s] + tr[ri, k]
            s = indices[k]
            steps += 1
        trace_idx += 1
        s = init
        steps = 0
        hit = 0
        for ri in range(n_rew):
            cur_acc[ri] = 0.0
    cur[0] = s
    cur[1] = steps
    cur[2] = hit
    return trace_idx, u_pos, 0


def _simulate_batch(d: Dtmc, n: int, seed: int, worker: int, step_cap: int,
                    target_mask: np.ndarray, reward_names: Sequence[str]):
    """Run n traces on one worker stream; returns per-trace arrays."""
    sr, tr = _reward_arrays(d, reward_names)
    absorbing = _absorbing_mask(d)
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(seed, spawn_key=(worker,))))
    out_state = np.zeros(n, dtype=np.int64)
    out_steps = np.zeros(n, dtype=np.int64)
    out_hit = np.zeros(n, dtype=np.int8)
    out_acc = np.zeros((len(reward_names), n), dtype=np.float64)
    out_capped = np.zeros(n, dtype=np.int8)
    cur = np.array([d.initial, 0, 0], dtype=np.int64)
    cur_acc = np.zeros(len(reward_names), dtype=np.float64)
    trace_idx = 0
    while True:
        u = rng.random(_CHUNK)
        trace_idx, _, resume = _run_batch(
            d.indptr, d.indices, d.probs, absorbing, target_mask, sr, tr,
            d.initial, step_cap, u, 0, trace_idx, cur, cur_acc,
            out_state, out_steps, out_hit, out_acc, out_capped)
        if not resume:
            break
    return out_state, out_steps, out_hit, out_acc, out_capped


def estimate_reach_probability(d: Dtmc, target_label: str, n: int, seed: int,
                               step_cap: int = 1_000_000,
                               workers: int = 1) -> Estimate:
    """Fraction of traces that ever visit `target_label`, with 95% CI."""
    if n < 1:
        raise ValueError("n must be >= 1")
    target = d.label_mask(target_label)
    hits, capped = [], 0
    for w, count in _shard(n, workers):
        _, _, hit, _, cap = _simulate_batch(d, count, seed, w, step_cap,
                                            target, ())
        hits.append(hit)
        capped += int(cap.sum())
    hit = np.concatenate(hits)
    p = float(hit.mean())
    half = Z_95 * math.sqrt(max(p * (1.0 - p), 0.0) / n)
    return Estimate(mean=p, half_width=half, n_samples=n, seed=seed,
                    truncated=capped)


def estimate_expected_reward(d: Dtmc, reward_name: str, target_label: str,
                             n: int, seed: int, step_cap: int = 1_000_000,
                             workers: int = 1) -> Estimate:
    """Sample mean of the reward accumulated until first reaching the target.

    The caller is expected to have confirmed (by exact checking) that the
    target is reached with probability 1; traces that absorb elsewhere or
    hit the step cap are counted in `truncated`.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    target = d.label_mask(target_label)
    values, bad = [], 0
    for w, count in _shard(n, workers):
        _, _, hit, acc, cap = _simulate_batch(d, count, seed, w, step_cap,
                                              target, (reward_name,))
        values.append(acc[0])
        bad += int((hit == 0).sum()) + int(cap.sum())
    vals = np.concatenate(values)
    mean = float(vals.mean())
    if n >= 2:
        half = Z_95 * float(vals.std(ddof=1)) / math.sqrt(n)
    else:
        half = 0.0
    return Estimate(mean=mean, half_width=half, n_samples=n, seed=seed,
                    truncated=bad)


def _shard(n: int, workers: int):
    """Deterministic (worker, count) split of n traces."""
    workers = max(1, int(workers))
    base = n // workers
    extra = n % workers
    out = []
    for w in range(workers):
        count = base + (1 if w < extra else 0)
        if count:
            out.append((w, count))
    return out


# ---------------------------------------------------------------------------
# Single reproducible traces with valuations (for CSV export / diagnostics)
# ---------------------------------------------------------------------------

def simulate_trace(d: Dtmc, seed: int, step_cap: int = 1_000_000,
                   stop_labels: Sequence[str] = ("success", "fail")) -> Trace:
    """One trace with per-step valuations and accumulated rewards.

    Runs until an absorbing state or the step cap; `terminal` is the first
    stop label holding in the final state, else 'absorbed' or 'cap'.
    """
    if step_cap <= 0:
        raise ValueError("step_cap must be > 0")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    reward_names = list(d.rewards)
    sr, tr = _reward_arrays(d, reward_names)
    acc = np.zeros(len(reward_names))
    steps: list = []
    s = d.initial
    step = 0
    terminal = "cap"
    while True:
        dst, p = d.row(s)
        absorbing = dst.size == 1 and dst[0] == s and p[0] >= 1.0
        if absorbing or step >= step_cap:
            steps.append(TraceStep(step, s, None, _valuation(d, s),
                                   _acc_dict(reward_names, acc)))
            terminal = "absorbed" if absorbing else "cap"
            for name in stop_labels:
                if name in d.labels and d.labels[name][s]:
                    terminal = name
                    break
            break
        x = rng.random()
        a, b = d.indptr[s], d.indptr[s + 1]
        k = b - 1
        cum = 0.0
        for j in range(a, b):
            cum += d.probs[j]
            if x < cum:
                k = j
                break
        steps.append(TraceStep(step, s, d.action_of_edge(int(k)),
                               _valuation(d, s), _acc_dict(reward_names, acc)))
        acc += sr[:, s] + tr[:, k]
        s = int(d.indices[k])
        step += 1
    return Trace(steps=steps, terminal=terminal, seed=seed)


def _valuation(d: Dtmc, s: int) -> dict:
    if d.valuations is None:
        return {}
    return {name: int(v) for name, v in zip(d.var_names, d.valuations[s])}


def _acc_dict(names, acc) -> dict:
    return {name: float(v) for name, v in zip(names, acc)}


def trace_to_csv(trace: Trace, d: Dtmc) -> str:
    """Fig-style trace table: step, action, one column per model variable,
    then accumulated reward columns."""
    reward_names = list(d.rewards)
    header = ["step", "action"] + list(d.var_names) + \
        [f"{name}_accum" for name in reward_names]
    lines = [",".join(header)]
    for st in trace.steps:
        row = [str(st.step), st.action or ""]
        row += [str(st.valuation.get(v, "")) for v in d.var_names]
        row += [repr(st.accumulated.get(name, 0.0)) for name in reward_names]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
