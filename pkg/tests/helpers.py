"""Shared test fixtures: random DTMC generation and independent oracles.

The oracles here deliberately avoid the library's solver code paths: dense
numpy linear solves, boolean-matrix closures and explicit path-tree
enumeration, so checker results can be compared against a second route.
"""

from __future__ import annotations

import numpy as np

from windcheck.dtmc import Dtmc


def random_dtmc(rng: np.random.Generator, n_states: int, max_fanout: int = 3,
                labels=None, seed_absorbing: bool = True) -> Dtmc:
    """Random sparse row-stochastic DTMC with `n_states` states.

    Each row has 1..max_fanout successors with Dirichlet weights rounded to
    exact doubles that sum to 1 (last entry takes the remainder).  With
    seed_absorbing, state n-1 is made absorbing so reachability questions
    have nontrivial answers.
    """
    indptr = [0]
    indices: list = []
    probs: list = []
    for s in range(n_states):
        if seed_absorbing and s == n_states - 1:
            dsts = np.array([s])
        else:
            k = int(rng.integers(1, max_fanout + 1))
            dsts = rng.choice(n_states, size=min(k, n_states), replace=False)
        if dsts.size == 1:
            ps = np.array([1.0])
        else:
            ps = rng.dirichlet(np.ones(dsts.size))
            ps = np.maximum(ps, 1e-3)
            ps = ps / ps.sum()
            ps[-1] = 1.0 - ps[:-1].sum()
        indices.extend(int(t) for t in dsts)
        probs.extend(float(p) for p in ps)
        indptr.append(len(indices))
    label_masks = {}
    if labels:
        for name, states in labels.items():
            mask = np.zeros(n_states, dtype=bool)
            mask[list(states)] = True
            label_masks[name] = mask
    return Dtmc(
        n_states=n_states, initial=0,
        indptr=np.array(indptr, dtype=np.int64),
        indices=np.array(indices, dtype=np.int64),
        probs=np.array(probs, dtype=np.float64),
        labels=label_masks,
    )


def dense_matrix(d: Dtmc) -> np.ndarray:
    P = np.zeros((d.n_states, d.n_states))
    for s in range(d.n_states):
        dst, p = d.row(s)
        for t, q in zip(dst, p):
            P[s, t] += q
    return P


def closure_reach(P: np.ndarray, start: int) -> np.ndarray:
    """Forward reachability via boolean matrix closure (oracle)."""
    adj = P > 0
    reach = np.zeros(len(P), dtype=bool)
    reach[start] = True
    for _ in range(len(P)):
        new = reach | (adj[reach].any(axis=0))
        if (new == reach).all():
            break
        reach = new
    return reach


def backward_closure(P: np.ndarray, targets: np.ndarray,
                     via: np.ndarray) -> np.ndarray:
    """States that can reach `targets`, moving only through `via` states."""
    adj = P > 0
    reach = targets.copy()
    for _ in range(len(P)):
        can_step = adj @ reach
        new = reach | (can_step & via)
        if (new == reach).all():
            break
        reach = new
    return reach


def until_oracle(P: np.ndarray, lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Unbounded-until probabilities by dense direct elimination."""
    n = len(P)
    can = backward_closure(P, rhs, lhs & ~rhs)
    x = np.zeros(n)
    x[rhs] = 1.0
    maybe = can & lhs & ~rhs
    idx = np.nonzero(maybe)[0]
    if idx.size:
        A = np.eye(idx.size) - P[np.ix_(idx, idx)]
        b = P[np.ix_(idx, np.nonzero(rhs)[0])].sum(axis=1)
        x[idx] = np.linalg.solve(A, b)
    return x


def bounded_until_oracle(P: np.ndarray, lhs: np.ndarray, rhs: np.ndarray,
                         t: int) -> np.ndarray:
    """Bounded until by explicit enumeration of the path tree (no memo)."""
    n = len(P)

    def prob(s: int, k: int) -> float:
        if rhs[s]:
            return 1.0
        if k == 0 or not lhs[s]:
            return 0.0
        total = 0.0
        for t_ in range(n):
            if P[s, t_] > 0:
                total += P[s, t_] * prob(t_, k - 1)
        return total

    return np.array([prob(s, t) for s in range(n)])


def reward_oracle(P: np.ndarray, state_r: np.ndarray, trans_r: np.ndarray,
                  target: np.ndarray) -> np.ndarray:
    """Expected reachability reward by dense solve; +inf where the target is
    not reached with probability 1 (graph-exact partition)."""
    n = len(P)
    can = backward_closure(P, target, ~target)
    no = ~can
    bad = backward_closure(P, no, ~target)
    yes = ~bad
    x = np.zeros(n)
    x[~yes] = np.inf
    idx = np.nonzero(yes & ~target)[0]
    if idx.size:
        gain = state_r + (P * trans_r).sum(axis=1)
        A = np.eye(idx.size) - P[np.ix_(idx, idx)]
        x[idx] = np.linalg.solve(A, gain[idx])
    return x
