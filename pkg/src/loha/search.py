"""Best-first search: weighted A* and focal search.

Both engines work on any domain exposing ``successors``/``is_goal`` and take
heuristics as plain callables ``state -> float``.  ``math.inf`` from a
heuristic is replaced by :data:`INF_PRIORITY`, so the node still gets
expanded eventually (nothing is pruned).

Ties on the primary key go to the larger ``g``, then to the earlier insertion.
A state is expanded at most once; a cheaper path to a state still in OPEN
replaces the old entry.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from itertools import count

# stands in for an infinite heuristic so dead ends are deprioritised, not pruned
INF_PRIORITY = 1e15

SOLVED = "solved"
EXHAUSTED = "exhausted"
LIMIT = "limit-reached"


@dataclass
class SearchResult:
    status: str
    path: list | None = None
    cost: float = math.inf
    expansions: int = 0
    generated: int = 0
    elapsed: float = 0.0
    expanded_states: list | None = field(default=None, repr=False)

    @property
    def solved(self) -> bool:
        return self.status == SOLVED


class _Node:
    __slots__ = ("state", "g", "parent", "h", "hf", "f", "fhat", "closed", "stale", "in_focal")

    def __init__(self, state, g, parent, h, f, hf=0.0, fhat=0.0):
        self.state = state
        self.g = g
        self.parent = parent
        self.h = h
        self.hf = hf
        self.f = f
        self.fhat = fhat
        self.closed = False
        self.stale = False
        self.in_focal = False


def reconstruct_path(node) -> list:
    path = []
    while node is not None:
        path.append(node.state)
        node = node.parent
    path.reverse()
    return path


def _finite(v: float) -> float:
    return INF_PRIORITY if v >= INF_PRIORITY else v


def weighted_astar(domain, start, h, w: float = 1.0, expansion_limit: int = 2_000_000,
                   record_expanded: bool = False, reopen: bool | None = None) -> SearchResult:
    """Best-first search on ``f = g + w*h``.

    With ``w == 1`` and admissible ``h`` this is A*; with ``h == 0`` it is
    uniform-cost search.  ``reopen`` (default: only when ``w == 1``) puts a
    closed state back on the queue when a cheaper path to it turns up, which
    keeps A* optimal under an admissible but inconsistent ``h`` such as
    ``h_g + h_k``.
    """
    if w < 1:
        raise ValueError("weight must be >= 1")
    if reopen is None:
        reopen = w == 1
    t0 = time.perf_counter()
    tie = count()
    h0 = h(start)
    root = _Node(start, 0.0, None, h0, _finite(w * h0))
    best = {start: root}
    heap = [(root.f, 0.0, next(tie), root)]
    expansions = generated = 0
    expanded = [] if record_expanded else None
    push, pop = heapq.heappush, heapq.heappop

    while heap:
        node = pop(heap)[3]
        if node.stale:
            continue
        if expansions >= expansion_limit:
            return SearchResult(LIMIT, None, math.inf, expansions, generated,
                                time.perf_counter() - t0, expanded)
        node.closed = True
        expansions += 1
        if expanded is not None:
            expanded.append(node.state)
        if domain.is_goal(node.state):
            return SearchResult(SOLVED, reconstruct_path(node), node.g, expansions, generated,
                                time.perf_counter() - t0, expanded)
        g0 = node.g
        for s2, c in domain.successors(node.state):
            generated += 1
            g2 = g0 + c
            old = best.get(s2)
            if old is not None:
                if g2 >= old.g or (old.closed and not reopen):
                    continue
                old.stale = True
                hv = old.h
            else:
                hv = h(s2)
            child = _Node(s2, g2, node, hv, INF_PRIORITY if hv == math.inf else g2 + w * hv)
            best[s2] = child
            push(heap, (child.f, -g2, next(tie), child))

    return SearchResult(EXHAUSTED, None, math.inf, expansions, generated,
                        time.perf_counter() - t0, expanded)


def focal_search(domain, start, h_open, h_focal, w: float = 1.0,
                 expansion_limit: int = 2_000_000, record_expanded: bool = False,
                 trace_fmin: list | None = None, focal_weight: float = 1.0) -> SearchResult:
    """Focal search with bound ``w``.

    OPEN is ordered by ``f = g + h_open``.  FOCAL holds the OPEN nodes with
    ``f <= w * f_min`` and is ordered by ``g + focal_weight * h_focal``
    (any FOCAL order keeps the ``w`` bound).  Nodes not yet in
    FOCAL wait in a heap keyed by ``f`` and are moved over as ``f_min`` rises;
    a FOCAL node whose ``f`` no longer qualifies (``f_min`` fell) is sent back.
    """
    if w < 1:
        raise ValueError("weight must be >= 1")
    if focal_weight <= 0:
        raise ValueError("focal_weight must be > 0")
    t0 = time.perf_counter()
    tie = count()
    push, pop = heapq.heappush, heapq.heappop

    def make(state, g, parent, hg, hf):
        return _Node(state, g, parent, hg, g + hg, hf, INF_PRIORITY if hf == math.inf else g + focal_weight * hf)

    root = make(start, 0.0, None, h_open(start), h_focal(start))
    best = {start: root}
    open_heap = [(root.f, next(tie), root)]
    focal = [(root.fhat, -root.g, next(tie), root)]
    root.in_focal = True
    waiting = []
    expansions = generated = 0
    expanded = [] if record_expanded else None
    bound = w * root.f

    while True:
        # f_min from OPEN, dropping closed/stale entries
        while open_heap and (open_heap[0][2].closed or open_heap[0][2].stale):
            pop(open_heap)
        if not open_heap:
            break
        f_min = open_heap[0][0]
        if trace_fmin is not None:
            trace_fmin.append(f_min)
        bound = w * f_min
        while waiting and waiting[0][0] <= bound:
            n = pop(waiting)[2]
            if n.closed or n.stale or n.in_focal:
                continue
            n.in_focal = True
            push(focal, (n.fhat, -n.g, next(tie), n))

        node = None
        while focal:
            n = pop(focal)[3]
            if n.closed or n.stale:
                continue
            if n.f > bound:
                n.in_focal = False
                push(waiting, (n.f, next(tie), n))
                continue
            node = n
            break
        if node is None:
            # cannot happen while OPEN is nonempty: the f_min node always qualifies
            raise RuntimeError("FOCAL empty while OPEN is not")

        if expansions >= expansion_limit:
            return SearchResult(LIMIT, None, math.inf, expansions, generated,
                                time.perf_counter() - t0, expanded)
        node.closed = True
        expansions += 1
        if expanded is not None:
            expanded.append(node.state)
        if domain.is_goal(node.state):
            return SearchResult(SOLVED, reconstruct_path(node), node.g, expansions, generated,
                                time.perf_counter() - t0, expanded)
        g0 = node.g
        for s2, c in domain.successors(node.state):
            generated += 1
            g2 = g0 + c
            old = best.get(s2)
            if old is not None:
                if old.closed or g2 >= old.g:
                    continue
                old.stale = True
                child = make(s2, g2, node, old.h, old.hf)
            else:
                child = make(s2, g2, node, h_open(s2), h_focal(s2))
            best[s2] = child
            push(open_heap, (child.f, next(tie), child))
            if child.f <= bound:
                child.in_focal = True
                push(focal, (child.fhat, -g2, next(tie), child))
            else:
                push(waiting, (child.f, next(tie), child))

    return SearchResult(EXHAUSTED, None, math.inf, expansions, generated,
                        time.perf_counter() - t0, expanded)


def path_cost(domain, path) -> float:
    """Sum of step costs along ``path``; raises if a step is not a successor."""
    total = 0.0
    for a, b in zip(path, path[1:]):
        for s2, c in domain.successors(a):
            if s2 == b:
                total += c
                break
        else:
            raise ValueError(f"{b} is not a successor of {a}")
    return total
