"""Numerical core for PCTL checking.

Graph precomputation identifies the probability-0 and probability-1 states
exactly before any numerics; the remaining linear system is solved by
Gauss-Seidel (alternating forward/backward sweeps) to a configurable
residual, or by dense direct elimination when the unknown set is small.
Kernels are JIT-compiled with numba when available and fall back to pure
Python otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:                               # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


class SolverError(RuntimeError):
    """Iteration cap exceeded; carries the last residual."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass
class SolverOptions:
    tol: float = 1e-10
    max_iters: int = 100_000
    direct_max: int = 512          # dense elimination below this many unknowns
    force_iterative: bool = False  # disable the direct path (used in tests)


@dataclass
class SolveStats:
    method: str = "precomputation"
    iterations: int = 0
    residual: float = 0.0
    pre_clamp_min: float = 0.0
    pre_clamp_max: float = 1.0

    def merge(self, other: "SolveStats") -> "SolveStats":
        return SolveStats(
            method=other.method if other.iterations or other.method != "precomputation"
            else self.method,
            iterations=self.iterations + other.iterations,
            residual=max(self.residual, other.residual),
            pre_clamp_min=min(self.pre_clamp_min, other.pre_clamp_min),
            pre_clamp_max=max(self.pre_clamp_max, other.pre_clamp_max),
        )


# ---------------------------------------------------------------------------
# Graph precomputation
# ---------------------------------------------------------------------------

@njit(cache=True)
def _bfs_via(indptr, indices, seed, via):
    """Mark states reaching (over the given adjacency) the seed set, where
    intermediate hops are restricted to `via` states; seeds always count."""
    n = seed.size
    seen = seed.copy()
    stack = np.empty(n, dtype=np.int64)
    top = 0
    for s in range(n):
        if seen[s]:
            stack[top] = s
            top += 1
    while top > 0:
        top -= 1
        s = stack[top]
        for k in range(indptr[s], indptr[s + 1]):
            t = indices[k]
            if not seen[t] and via[t]:
                seen[t] = True
                stack[top] = t
                top += 1
    return seen


def _transpose_graph(d) -> Tuple[np.ndarray, np.ndarray]:
    csc = d.transition_matrix().tocsc()
    return csc.indptr.astype(np.int64), csc.indices.astype(np.int64)


def prob01(d, lhs: np.ndarray, rhs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Exact probability-1 and probability-0 state sets for `lhs U rhs`.

    prob0: complement of the set that can reach rhs through lhs-states.
    prob1: complement of the set that can reach prob0 through (lhs \\ rhs).
    """
    tp, ti = _transpose_graph(d)
    via = lhs & ~rhs
    can_reach = _bfs_via(tp, ti, rhs, via)
    no = ~can_reach
    bad = _bfs_via(tp, ti, no, via)
    yes = ~bad
    return yes, no


# ---------------------------------------------------------------------------
# Gauss-Seidel
# ---------------------------------------------------------------------------

@njit(cache=True)
def _gs_forward(indptr, indices, data, x, b):
    delta = 0.0
    for i in range(x.size):
        acc = b[i]
        diag = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j == i:
                diag = data[k]
            else:
                acc += data[k] * x[j]
        new = acc / (1.0 - diag)
        diff = abs(new - x[i])
        if diff > delta:
            delta = diff
        x[i] = new
    return delta


@njit(cache=True)
def _gs_backward(indptr, indices, data, x, b):
    delta = 0.0
    for i in range(x.size - 1, -1, -1):
        acc = b[i]
        diag = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j == i:
                diag = data[k]
            else:
                acc += data[k] * x[j]
        new = acc / (1.0 - diag)
        diff = abs(new - x[i])
        if diff > delta:
            delta = diff
        x[i] = new
    return delta


@njit(cache=True)
def _residual(indptr, indices, data, x, b):
    worst = 0.0
    for i in range(x.size):
        acc = b[i]
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        diff = abs(acc - x[i])
        if diff > worst:
            worst = diff
    return worst


def _solve_system(sub, b: np.ndarray, opts: SolverOptions) -> Tuple[np.ndarray, SolveStats]:
    """Solve x = A x + b for substochastic CSR matrix A."""
    m = b.size
    if m == 0:
        return np.zeros(0), SolveStats(method="precomputation")
    if m <= opts.direct_max and not opts.force_iterative:
        dense = np.eye(m) - sub.toarray()
        x = np.linalg.solve(dense, b)
        res = float(_residual(sub.indptr.astype(np.int64),
                              sub.indices.astype(np.int64),
                              sub.data, x, b))
        return x, SolveStats(method="direct", iterations=0, residual=res)

    indptr = sub.indptr.astype(np.int64)
    indices = sub.indices.astype(np.int64)
    data = sub.data.astype(np.float64)
    x = np.zeros(m)
    iters = 0
    res = np.inf
    while iters < opts.max_iters:
        delta = _gs_forward(indptr, indices, data, x, b)
        iters += 1
        if delta <= opts.tol:
            res = float(_residual(indptr, indices, data, x, b))
            if res <= opts.tol:
                return x, SolveStats(method="gauss-seidel", iterations=iters,
                                     residual=res)
        if iters >= opts.max_iters:
            break
        delta = _gs_backward(indptr, indices, data, x, b)
        iters += 1
        if delta <= opts.tol:
            res = float(_residual(indptr, indices, data, x, b))
            if res <= opts.tol:
                return x, SolveStats(method="gauss-seidel", iterations=iters,
                                     residual=res)
    res = float(_residual(indptr, indices, data, x, b))
    raise SolverError(
        f"Gauss-Seidel did not converge in {iters} sweeps (residual {res:.3e})",
        residual=res, iterations=iters)


# ---------------------------------------------------------------------------
# Reachability probabilities and rewards
# ---------------------------------------------------------------------------

def solve_until(d, lhs: np.ndarray, rhs: np.ndarray,
                opts: Optional[SolverOptions] = None) -> Tuple[np.ndarray, SolveStats]:
    """Per-state probability of `lhs U rhs`, clamped to [0,1]."""
    opts = opts or SolverOptions()
    yes, no = prob01(d, lhs, rhs)
    x = np.zeros(d.n_states)
    x[yes] = 1.0
    unknown = ~(yes | no)
    stats = SolveStats()
    if unknown.any():
        rows = np.nonzero(unknown)[0]
        P = d.transition_matrix()
        sub = P[rows][:, rows].tocsr()
        b = np.asarray(P[rows][:, np.nonzero(yes)[0]].sum(axis=1)).ravel()
        xs, stats = _solve_system(sub, b, opts)
        stats.pre_clamp_min = float(min(0.0, xs.min()))
        stats.pre_clamp_max = float(max(1.0, xs.max()))
        x[rows] = np.clip(xs, 0.0, 1.0)
    return x, stats


def solve_bounded_until(d, lhs: np.ndarray, rhs: np.ndarray, t: int) -> np.ndarray:
    """t backward iterations of x <- 1_rhs + 1_{lhs minus rhs} * (P x)."""
    if t < 0:
        raise ValueError("bound must be >= 0")
    P = d.transition_matrix()
    keep = lhs & ~rhs
    x = rhs.astype(np.float64)
    for _ in range(t):
        x = rhs + keep * P.dot(x)
    return x


def solve_next(d, target: np.ndarray) -> np.ndarray:
    return d.transition_matrix().dot(target.astype(np.float64))


def solve_reach_reward(d, reward, target: np.ndarray,
                       opts: Optional[SolverOptions] = None) -> Tuple[np.ndarray, SolveStats]:
    """Expected accumulated reward until first reaching `target`.

    States that do not reach the target with probability 1 get +inf,
    matching the reachability-reward restriction; target states get 0.
    """
    opts = opts or SolverOptions()
    all_states = np.ones(d.n_states, dtype=bool)
    yes, _ = prob01(d, all_states, target)
    x = np.zeros(d.n_states)
    x[~yes] = np.inf
    unknown = yes & ~target
    stats = SolveStats()
    if unknown.any():
        rows = np.nonzero(unknown)[0]
        P = d.transition_matrix()
        sub = P[rows][:, rows].tocsr()
        b = np.zeros(d.n_states)
        if reward.state_rewards is not None:
            b += reward.state_rewards
        if reward.trans_rewards is not None:
            weighted = d.probs * reward.trans_rewards
            b += np.add.reduceat(weighted, d.indptr[:-1]) * \
                (d.indptr[1:] > d.indptr[:-1])
        xs, stats = _solve_system(sub, b[rows], opts)
        stats.pre_clamp_min = float(min(0.0, xs.min()))
        stats.pre_clamp_max = 1.0
        x[rows] = np.maximum(xs, 0.0)
    return x, stats
