"""Planning domains: a 4-connected unit grid and a non-holonomic car lattice.

Both domains are bound to a map and a goal and expose the same small
surface used by the search and local-heuristic code:

``successors(s)``  list of ``(state, cost)``
``h(s)``           global heuristic to the goal
``is_goal(s)``
``position(s)``    continuous ``(x, y)`` in map units
``cell(s)``        occupied cell ``(floor(x), floor(y))``
``h_cell(cx, cy)`` global heuristic evaluated at a cell center

Car lattice geometry
--------------------
State ``(x2, y2, theta, v)``: position in half-units, heading index
(30 degrees each) and velocity in ``{-1, 0, 1, 2, 3}``.  Each step applies one
of 15 unit-cost actions ``(dv, steer)``.  With ``v' = v + dv`` (rejected
outside ``[-1, 3]``):

* ``v' == 0``: the car stays put (same heading), cost 1.
* otherwise ``dtheta = steer/30 * sign(v')``, ``theta' = theta + dtheta (mod 12)``
  and the car moves ``v'`` units along the mid heading
  ``30*theta + 15*dtheta`` degrees; the displacement is rounded to the nearest
  half-unit per axis.

The straight segment between the two positions is sampled at spacing
<= 0.5 (both endpoints included) and the move is rejected if any sample lies
in a blocked cell.  The robot is a point.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .gridmap import GridMap, is_blocked

N_HEADINGS = 12
HEADING_DEG = 30
V_MIN, V_MAX = -1, 3
MAX_SPEED = 3
GOAL_TOLERANCE = 1.0


class GridState(NamedTuple):
    x: int
    y: int


class CarState(NamedTuple):
    x2: int
    y2: int
    theta: int
    v: int

    @property
    def x(self) -> float:
        return self.x2 * 0.5

    @property
    def y(self) -> float:
        return self.y2 * 0.5


class Action(NamedTuple):
    dv: int
    steer: int


# fixed order: dv ascending, then steer ascending
ACTIONS = tuple(Action(dv, st) for dv in (-1, 0, 1) for st in (-60, -30, 0, 30, 60))

_GRID_MOVES = ((0, -1), (-1, 0), (1, 0), (0, 1))


def grid_successors(grid: GridMap, s: GridState) -> list:
    out = []
    for dx, dy in _GRID_MOVES:
        nx, ny = s.x + dx, s.y + dy
        if not is_blocked(grid, nx, ny):
            out.append((GridState(nx, ny), 1))
    return out


def grid_h(s: GridState, goal: GridState) -> float:
    return abs(s.x - goal.x) + abs(s.y - goal.y)


def _round_half(val: float) -> int:
    return math.floor(val + 0.5)


def _ceil_sqrt(n: int) -> int:
    r = math.isqrt(n)
    return r if r * r == n else r + 1


def _swept_cells(dx2: int, dy2: int, px: int, py: int) -> tuple:
    """Cell offsets visited by a segment of half-unit displacement ``(dx2, dy2)``.

    ``px``/``py`` are the parities of the start position in half units; the
    offsets are relative to the start cell.  Exact integer arithmetic.
    """
    n = max(1, _ceil_sqrt(dx2 * dx2 + dy2 * dy2))
    cells = []
    for i in range(n + 1):
        c = ((px * n + i * dx2) // (2 * n), (py * n + i * dy2) // (2 * n))
        if c not in cells:
            cells.append(c)
    return tuple(cells)


class _Primitive(NamedTuple):
    action: Action
    dx2: int
    dy2: int
    theta: int
    v: int
    cells: tuple  # per parity (px, py) -> offsets, indexed px*2+py


def _build_primitives():
    table = {}
    for theta in range(N_HEADINGS):
        for v in range(V_MIN, V_MAX + 1):
            prims = []
            for a in ACTIONS:
                v2 = v + a.dv
                if v2 < V_MIN or v2 > V_MAX:
                    continue
                if v2 == 0:
                    prims.append(_Primitive(a, 0, 0, theta, 0, ((((0, 0),),) * 4)))
                    continue
                sgn = 1 if v2 > 0 else -1
                dth = (a.steer // HEADING_DEG) * sgn
                th2 = (theta + dth) % N_HEADINGS
                mid = math.radians(HEADING_DEG * theta + 0.5 * HEADING_DEG * dth)
                dx2 = _round_half(2 * v2 * math.cos(mid))
                dy2 = _round_half(2 * v2 * math.sin(mid))
                cells = tuple(_swept_cells(dx2, dy2, px, py) for px in (0, 1) for py in (0, 1))
                prims.append(_Primitive(a, dx2, dy2, th2, v2, cells))
            table[theta, v] = tuple(prims)
    return table


PRIMITIVES = _build_primitives()
# longest single-step displacement, map units
MAX_STEP = max(math.hypot(p.dx2, p.dy2) for ps in PRIMITIVES.values() for p in ps) / 2.0


def car_successors(grid: GridMap, s: CarState) -> list:
    out = []
    cx, cy = s.x2 >> 1, s.y2 >> 1
    par = (s.x2 & 1) * 2 + (s.y2 & 1)
    for p in PRIMITIVES[s.theta, s.v]:
        if any(is_blocked(grid, cx + ox, cy + oy) for ox, oy in p.cells[par]):
            continue
        out.append((CarState(s.x2 + p.dx2, s.y2 + p.dy2, p.theta, p.v), 1))
    return out


def car_h(s: CarState, goal: CarState) -> float:
    return math.hypot(s.x2 - goal.x2, s.y2 - goal.y2) / (2.0 * MAX_SPEED)


def car_is_goal(s: CarState, goal: CarState) -> bool:
    dx, dy = s.x2 - goal.x2, s.y2 - goal.y2
    # compare in half-units: dist <= 1.0  <=>  dx^2 + dy^2 <= 4
    return dx * dx + dy * dy <= 4 * GOAL_TOLERANCE * GOAL_TOLERANCE


class GridDomain:
    """4-connected unit-cost grid with Manhattan global heuristic."""

    name = "grid"
    # max over edges of (h(s) - h(s')) / c(s, s')
    lipschitz = 1.0
    goal_h_max = 0.0

    def __init__(self, grid: GridMap, goal):
        self.grid = grid
        self.goal = GridState(*goal)
        self._occ = grid.occupancy

    def with_goal(self, goal) -> "GridDomain":
        return GridDomain(self.grid, goal)

    def successors(self, s):
        occ, w, h = self._occ, self.grid.width, self.grid.height
        x, y = s
        out = []
        for dx, dy in _GRID_MOVES:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and not occ[ny, nx]:
                out.append((GridState(nx, ny), 1))
        return out

    def h(self, s) -> float:
        return abs(s[0] - self.goal.x) + abs(s[1] - self.goal.y)

    def h_cell(self, cx: int, cy: int) -> float:
        return abs(cx - self.goal.x) + abs(cy - self.goal.y)

    def h_cells(self, cx: np.ndarray, cy: np.ndarray) -> np.ndarray:
        return (np.abs(cx - self.goal.x) + np.abs(cy - self.goal.y)).astype(np.float64)

    def is_goal(self, s) -> bool:
        return s[0] == self.goal.x and s[1] == self.goal.y

    def position(self, s):
        return s[0], s[1]

    def cell(self, s):
        return s[0], s[1]

    def is_valid(self, s) -> bool:
        return not is_blocked(self.grid, s[0], s[1])

    def invariant_state(self, s):
        return (0.0, 0.0, 0.0, 0.0)

    def max_h_drop(self, K: int) -> float:
        # interior positions have |dx|,|dy| < K; one unit step beyond
        return 2.0 * K

    def state_from_cell(self, cx: int, cy: int, rng=None):
        return GridState(cx, cy)


class CarDomain:
    """Car lattice with ``h_g = L2 / 3`` and a 1.0-unit goal tolerance."""

    name = "car"
    lipschitz = MAX_STEP / MAX_SPEED
    goal_h_max = GOAL_TOLERANCE / MAX_SPEED
    _PAD = 5

    def __init__(self, grid: GridMap, goal):
        self.grid = grid
        self.goal = CarState(*goal)
        pad = self._PAD
        self._wp = grid.width + 2 * pad
        self._occ = grid.padded(pad).ravel().tobytes()
        wp = self._wp
        # per (theta, v): tuple of (dx2, dy2, theta', v', deltas per parity)
        self._prims = {}
        for key, prims in PRIMITIVES.items():
            self._prims[key] = tuple(
                (p.dx2, p.dy2, p.theta, p.v,
                 tuple(tuple(oy * wp + ox for ox, oy in cells) for cells in p.cells))
                for p in prims)

    def with_goal(self, goal) -> "CarDomain":
        return CarDomain(self.grid, goal)

    def _base(self, x2: int, y2: int) -> int:
        return ((y2 >> 1) + self._PAD) * self._wp + (x2 >> 1) + self._PAD

    def successors(self, s):
        x2, y2, th, v = s
        occ = self._occ
        base = self._base(x2, y2)
        par = (x2 & 1) * 2 + (y2 & 1)
        out = []
        new = tuple.__new__
        for dx2, dy2, th2, v2, deltas in self._prims[th, v]:
            for d in deltas[par]:
                if occ[base + d]:
                    break
            else:
                out.append((new(CarState, (x2 + dx2, y2 + dy2, th2, v2)), 1))
        return out

    def h(self, s) -> float:
        return math.hypot(s[0] - self.goal.x2, s[1] - self.goal.y2) / (2.0 * MAX_SPEED)

    def h_cell(self, cx: int, cy: int) -> float:
        return math.hypot(cx + 0.5 - self.goal.x2 * 0.5, cy + 0.5 - self.goal.y2 * 0.5) / MAX_SPEED

    def h_cells(self, cx: np.ndarray, cy: np.ndarray) -> np.ndarray:
        return np.hypot(cx + 0.5 - self.goal.x2 * 0.5, cy + 0.5 - self.goal.y2 * 0.5) / MAX_SPEED

    def is_goal(self, s) -> bool:
        dx, dy = s[0] - self.goal.x2, s[1] - self.goal.y2
        return dx * dx + dy * dy <= 4

    def position(self, s):
        return s[0] * 0.5, s[1] * 0.5

    def cell(self, s):
        return s[0] >> 1, s[1] >> 1

    def is_valid(self, s) -> bool:
        x2, y2, th, v = s
        return (0 <= th < N_HEADINGS and V_MIN <= v <= V_MAX
                and not is_blocked(self.grid, x2 >> 1, y2 >> 1))

    def invariant_state(self, s):
        x2, y2, th, v = s
        return ((x2 & 1) * 0.5, (y2 & 1) * 0.5, th / N_HEADINGS, (v - V_MIN) / (V_MAX - V_MIN + 1))

    def max_h_drop(self, K: int) -> float:
        return (K * math.sqrt(2.0) + MAX_STEP) / MAX_SPEED

    def state_from_cell(self, cx: int, cy: int, rng=None):
        theta = 0 if rng is None else int(rng.integers(N_HEADINGS))
        return CarState(2 * cx, 2 * cy, theta, 0)


DOMAINS = {"grid": GridDomain, "car": CarDomain}


def make_domain(kind: str, grid: GridMap, goal):
    try:
        return DOMAINS[kind](grid, goal)
    except KeyError:
        raise ValueError(f"unknown domain {kind!r}") from None


def free_cells(grid: GridMap) -> np.ndarray:
    """(n, 2) array of unblocked ``(x, y)`` cells in row-major order."""
    ys, xs = np.nonzero(~grid.occupancy)
    return np.stack([xs, ys], axis=1)
