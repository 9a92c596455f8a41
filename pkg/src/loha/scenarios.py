"""Seeded start/goal sampling with a solvability check."""

from __future__ import annotations

import logging
import math
from collections import deque

import numpy as np

from .domains import make_domain, free_cells
from .search import weighted_astar

log = logging.getLogger(__name__)

# weighted A* settings for the car solvability witness
CAR_CHECK_WEIGHT = 8.0
CAR_CHECK_LIMIT = 200_000


def grid_components(grid) -> np.ndarray:
    """4-connected component label per cell (-1 for blocked)."""
    h, w = grid.height, grid.width
    occ = grid.occupancy
    label = np.full((h, w), -1, dtype=np.int64)
    nxt = 0
    for y0 in range(h):
        for x0 in range(w):
            if occ[y0, x0] or label[y0, x0] >= 0:
                continue
            label[y0, x0] = nxt
            q = deque([(x0, y0)])
            while q:
                x, y = q.popleft()
                for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                    if 0 <= nx < w and 0 <= ny < h and not occ[ny, nx] and label[ny, nx] < 0:
                        label[ny, nx] = nxt
                        q.append((nx, ny))
            nxt += 1
    return label


def is_solvable(domain, start, limit: int = CAR_CHECK_LIMIT) -> bool:
    """Bounded solvability witness: a greedy-leaning weighted A* run."""
    return weighted_astar(domain, start, domain.h, CAR_CHECK_WEIGHT, limit).solved


def generate_scenarios(grid, domain_kind: str, n: int, seed: int, min_separation: float | None = None,
                       max_tries: int | None = None, check_limit: int = CAR_CHECK_LIMIT) -> list:
    """``n`` solvable ``(start, goal)`` pairs, positions at least ``min_separation`` apart.

    Start and goal sit at the corner of a free cell; car starts get a random
    heading and zero velocity, car goals heading 0 and zero velocity (the goal
    test ignores both).  Grid pairs are checked by connectivity, car pairs by
    a bounded weighted A* run.  Returns fewer pairs (with a warning) when the
    retry budget runs out.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if min_separation is None:
        min_separation = grid.width / 2
    if max_tries is None:
        max_tries = 50 * n
    rng = np.random.default_rng(seed)
    cells = free_cells(grid)
    pairs = []
    if len(cells) == 0:
        log.warning("%s: no free cells, no scenarios", grid.name)
        return pairs
    comp = grid_components(grid) if domain_kind == "grid" else None
    tries = 0
    while len(pairs) < n and tries < max_tries:
        tries += 1
        a = cells[rng.integers(len(cells))]
        b = cells[rng.integers(len(cells))]
        if math.dist(a, b) < min_separation:
            continue
        goal_dom = make_domain(domain_kind, grid, _goal_state(domain_kind, b))
        start = goal_dom.state_from_cell(int(a[0]), int(a[1]), rng)
        if domain_kind == "grid":
            ok = comp[a[1], a[0]] == comp[b[1], b[0]]
        else:
            ok = is_solvable(goal_dom, start, check_limit)
        if ok:
            pairs.append((start, goal_dom.goal))
    if len(pairs) < n:
        log.warning("%s: only %d of %d solvable scenarios after %d tries", grid.name, len(pairs), n, tries)
    return pairs


def _goal_state(kind: str, cell):
    cx, cy = int(cell[0]), int(cell[1])
    return (cx, cy) if kind == "grid" else (2 * cx, 2 * cy, 0, 0)
