"""Binary search over a horizon: exhaustive enumeration and depth-first branch & bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import BinaryHistory, feasible_sequences, min_off_constraints
from .horizon import ContinuousResult, HorizonWindow, solve_continuous, solve_relaxed

# a node is pruned only when its relaxation exceeds the incumbent by this much
PRUNE_MARGIN = 1e-6


@dataclass
class SearchOutcome:
    binaries: tuple | None
    plan: ContinuousResult | None
    nodes: int
    exhausted: bool  # False when the node limit stopped the search early
    root_bound: float = float("nan")

    @property
    def objective(self) -> float:
        return self.plan.objective if self.plan is not None else float("inf")


def enumerate_binaries(window: HorizonWindow, history: BinaryHistory, d_min: int,
                       v_start: float) -> SearchOutcome:
    """Solve the continuous problem for every admissible sequence and keep the best.

    Ties go to the first sequence in :func:`feasible_sequences` order.
    """
    best = None
    best_seq = None
    count = 0
    for seq in feasible_sequences(history, len(window), d_min):
        res = solve_continuous(window, seq, v_start, history.last, raise_infeasible=False)
        count += 1
        if res.feasible and (best is None or res.objective < best.objective):
            best, best_seq = res, seq
    return SearchOutcome(best_seq, best, count, True)


def _branch_index(z, lo, hi) -> int:
    free = np.flatnonzero(lo != hi)
    frac = np.minimum(z[free], 1.0 - z[free])
    return int(free[int(np.argmax(frac))])  # argmax keeps the lowest index on ties


def branch_and_bound(window: HorizonWindow, history: BinaryHistory, d_min: int, v_start: float,
                     incumbent=None, max_nodes: int | None = 200) -> SearchOutcome:
    """Depth-first branch & bound on the horizon binaries.

    Bounds come from :func:`solve_relaxed`; the branching variable is the most
    fractional one and the ``1`` child is explored first.  ``incumbent`` (an
    admissible sequence, e.g. the previous plan shifted by one step) seeds the
    upper bound.  Every relaxed or leaf solve counts as one node; when
    ``max_nodes`` is reached the best plan found so far is returned with
    ``exhausted=False``.
    """
    n = len(window)
    prev = history.last
    cons = min_off_constraints(history, n, d_min)
    limit = np.inf if max_nodes is None else max_nodes
    nodes = 0
    best = None
    best_seq = None

    def consider(seq):
        nonlocal best, best_seq, nodes
        nodes += 1
        res = solve_continuous(window, seq, v_start, prev, raise_infeasible=False)
        if res.feasible and (best is None or res.objective < best.objective):
            best, best_seq = res, tuple(int(s) for s in seq)

    if incumbent is not None and len(incumbent) == n and cons.satisfies(incumbent):
        consider(incumbent)

    root = cons.propagate(np.zeros(n), np.ones(n))
    stack = [] if root is None else [(root[0], root[1], None)]
    root_bound = float("nan")
    while stack:
        if nodes >= limit:
            return SearchOutcome(best_seq, best, nodes, False, root_bound)
        lo, hi, start = stack.pop()
        if np.all(lo == hi):
            if cons.satisfies(lo):
                consider(lo)
            continue
        nodes += 1
        rel = solve_relaxed(window, lo, hi, v_start, prev, start=start)
        if np.isnan(root_bound):
            root_bound = rel.objective
        if not rel.feasible:
            continue
        if best is not None and rel.objective > best.objective + PRUNE_MARGIN * (1.0 + abs(best.objective)):
            continue
        j = _branch_index(rel.signals, lo, hi)
        x = np.concatenate([rel.engine_torque / window.scenario.limits.engine_torque_max,
                            rel.brake_torque / window.scenario.limits.brake_torque_max, rel.signals])
        for value in (0.0, 1.0):  # pushed last is explored first
            clo, chi = lo.copy(), hi.copy()
            clo[j] = chi[j] = value
            tightened = cons.propagate(clo, chi)
            if tightened is not None:
                stack.append((tightened[0], tightened[1], x))
    return SearchOutcome(best_seq, best, nodes, True, root_bound)
