"""Exact local heuristic: the extra cost, beyond the global heuristic, to
leave a (2K+1)-wide window around a state or reach the goal inside it.

For a state ``s`` the local search runs from ``s`` and only expands states
strictly inside the window (``|dx| < K`` and ``|dy| < K`` in map units).
Terminal candidates are recorded when generated:

* escape: a state with ``|dx| >= K`` or ``|dy| >= K``;
  value ``g(s') + h_g(s') - h_g(s)``
* goal: a goal state inside the window; value ``g(s') - h_g(s)``

The result is the smallest candidate, floored at 0, or :data:`DEAD_END`
when the window cannot be left and holds no goal.

Ordering uses ``g + (h_g(s') - h_g(s)) / L`` where ``L`` is the domain's
largest per-unit-cost drop in ``h_g`` (1 on the grid, slightly above 1 on
the car lattice because displacements are rounded).  That key never
decreases along a path, so once the best candidate is at most the smallest
key minus a small domain slack, nothing left in the queue can beat it.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from itertools import count

DEAD_END = math.inf


@dataclass(frozen=True)
class LocalRegionSpec:
    K: int = 4
    expansion_cap: int | None = None  # None: unlimited

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.expansion_cap is not None and self.expansion_cap < 1:
            raise ValueError("expansion_cap must be >= 1 or None")


@dataclass(frozen=True)
class LocalHValue:
    value: float
    exact: bool = True
    expansions: int = 0

    @property
    def dead_end(self) -> bool:
        return self.value == DEAD_END


def in_region(domain, s, t, K: int) -> bool:
    """``t`` lies in the closed window LR(s)."""
    sx, sy = domain.position(s)
    tx, ty = domain.position(t)
    return abs(tx - sx) <= K and abs(ty - sy) <= K


def on_border(domain, s, t, K: int) -> bool:
    """``t`` lies on LRB(s): inside LR(s) with offset exactly K on some axis."""
    sx, sy = domain.position(s)
    tx, ty = domain.position(t)
    dx, dy = abs(tx - sx), abs(ty - sy)
    return dx <= K and dy <= K and (dx == K or dy == K)


def termination_slack(domain, K: int) -> float:
    rho = domain.lipschitz
    return (1.0 - 1.0 / rho) * domain.max_h_drop(K) + domain.goal_h_max


def local_h_exact(domain, s, spec: LocalRegionSpec) -> LocalHValue:
    K = spec.K
    cap = spec.expansion_cap
    h = domain.h
    h0 = h(s)
    if domain.is_goal(s):
        return LocalHValue(0.0, True, 0)
    sx, sy = domain.position(s)
    inv_rho = 1.0 / domain.lipschitz
    slack = termination_slack(domain, K)
    is_goal = domain.is_goal
    position = domain.position
    successors = domain.successors

    best = math.inf
    g_of = {s: 0.0}
    tie = count()
    heap = [(0.0, next(tie), 0.0, s)]
    closed = set()
    expansions = 0
    push, pop = heapq.heappush, heapq.heappop

    while heap:
        key, _, g, u = heap[0]
        if best <= key - slack:
            break
        if u in closed or g > g_of[u]:
            pop(heap)
            continue
        if cap is not None and expansions >= cap:
            # every remaining candidate is >= key - slack
            return LocalHValue(max(0.0, min(best, key - slack)), False, expansions)
        pop(heap)
        closed.add(u)
        expansions += 1
        for v, c in successors(u):
            g2 = g + c
            vx, vy = position(v)
            if abs(vx - sx) >= K or abs(vy - sy) >= K:
                cand = g2 + h(v) - h0
                if cand < best:
                    best = cand
                continue
            if is_goal(v):
                cand = g2 - h0
                if cand < best:
                    best = cand
                continue
            if v in closed:
                continue
            old = g_of.get(v)
            if old is not None and old <= g2:
                continue
            g_of[v] = g2
            push(heap, (g2 + (h(v) - h0) * inv_rho, next(tie), g2, v))

    if best == math.inf:
        return LocalHValue(DEAD_END, True, expansions)
    return LocalHValue(max(0.0, best), True, expansions)


def combined_h(h_g_value: float, hk) -> float:
    """``h_g + h_k``; a dead end propagates as ``math.inf``."""
    v = hk.value if isinstance(hk, LocalHValue) else hk
    if v == DEAD_END:
        return math.inf
    return h_g_value + v


class ExactLocalHeuristic:
    """``h_gk = h_g + h_k`` with the exact local search, as a search heuristic.

    Values are memoised per state for the lifetime of one instance (one
    search); ``evaluations`` counts local searches actually run.
    """

    def __init__(self, domain, K: int = 4, expansion_cap: int | None = None):
        self.domain = domain
        self.spec = LocalRegionSpec(K, expansion_cap)
        self.hk_cache = {}
        self.evaluations = 0
        self.local_expansions = 0

    def local(self, s) -> LocalHValue:
        r = self.hk_cache.get(s)
        if r is None:
            r = local_h_exact(self.domain, s, self.spec)
            self.hk_cache[s] = r
            self.evaluations += 1
            self.local_expansions += r.expansions
        return r

    def __call__(self, s) -> float:
        return combined_h(self.domain.h(s), self.local(s))
