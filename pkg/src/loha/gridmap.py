"""Binary occupancy maps.

Coordinates: ``x`` is the column and ``y`` the row, origin at the top-left
cell.  ``occupancy[y, x]`` is True for blocked cells.  Anything outside the
map is blocked.

Maps are read and written in the MovingAI ``.map`` text format::

    type octile
    height H
    width W
    map
    <H rows of W characters>

``.`` and ``G`` are passable; ``@ O T S W`` are blocked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PASSABLE = frozenset(".G")
BLOCKED = frozenset("@OTSW")

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class MapParseError(ValueError):
    """Raised for malformed map text; ``line`` is 1-based."""

    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


@dataclass(frozen=True, eq=False)
class GridMap:
    width: int
    height: int
    occupancy: np.ndarray = field(repr=False)
    name: str = "map"

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"map dimensions must be positive, got {self.width}x{self.height}")
        occ = np.ascontiguousarray(self.occupancy, dtype=bool)
        if occ.shape != (self.height, self.width):
            raise ValueError(f"occupancy shape {occ.shape} != ({self.height}, {self.width})")
        occ = occ.copy()
        occ.flags.writeable = False
        object.__setattr__(self, "occupancy", occ)

    def __eq__(self, other):
        if not isinstance(other, GridMap):
            return NotImplemented
        return (self.width == other.width and self.height == other.height
                and np.array_equal(self.occupancy, other.occupancy))

    def __hash__(self):
        return hash((self.width, self.height, self.occupancy.tobytes()))

    def is_blocked(self, x: int, y: int) -> bool:
        return is_blocked(self, x, y)

    def blocked_fraction(self) -> float:
        return float(self.occupancy.mean())

    def padded(self, pad: int) -> np.ndarray:
        """Occupancy with ``pad`` blocked cells on every side."""
        return np.pad(self.occupancy, pad, constant_values=True)

    @classmethod
    def empty(cls, width: int, height: int, name: str = "empty") -> "GridMap":
        return cls(width, height, np.zeros((height, width), dtype=bool), name)

    @classmethod
    def from_rows(cls, rows, name: str = "map") -> "GridMap":
        """Build from a list of strings using the MovingAI characters."""
        return parse_map(_header(len(rows[0]) if rows else 0, len(rows)) + "\n".join(rows) + "\n", name=name)


def is_blocked(grid: GridMap, x: int, y: int) -> bool:
    if x < 0 or y < 0 or x >= grid.width or y >= grid.height:
        return True
    return bool(grid.occupancy[y, x])


def _header(width: int, height: int) -> str:
    return f"type octile\nheight {height}\nwidth {width}\nmap\n"


def parse_map(text: str, name: str = "map") -> GridMap:
    lines = text.splitlines()
    # header lines may come in any order before "map"
    dims = {}
    i = 0
    saw_type = False
    while True:
        if i >= len(lines):
            raise MapParseError(i + 1, "unexpected end of header (missing 'map' line)")
        parts = lines[i].split()
        if not parts:
            raise MapParseError(i + 1, "blank header line")
        key = parts[0].lower()
        if key == "map" and len(parts) == 1:
            i += 1
            break
        if key == "type" and len(parts) == 2:
            saw_type = True
        elif key in ("height", "width") and len(parts) == 2:
            try:
                dims[key] = int(parts[1])
            except ValueError:
                raise MapParseError(i + 1, f"bad {key} value {parts[1]!r}") from None
            if dims[key] < 1:
                raise MapParseError(i + 1, f"{key} must be positive")
        else:
            raise MapParseError(i + 1, f"malformed header line {lines[i]!r}")
        i += 1
    if not saw_type:
        raise MapParseError(i, "missing 'type' header")
    if "height" not in dims or "width" not in dims:
        raise MapParseError(i, "missing height or width header")
    h, w = dims["height"], dims["width"]

    rows = lines[i:]
    # tolerate trailing blank lines only
    while rows and not rows[-1].strip():
        rows.pop()
    if len(rows) != h:
        raise MapParseError(i + len(rows), f"expected {h} rows, found {len(rows)}")

    occ = np.zeros((h, w), dtype=bool)
    for r, row in enumerate(rows):
        lineno = i + r + 1
        row = row.rstrip("\r")
        if len(row) != w:
            raise MapParseError(lineno, f"row length {len(row)} != width {w}")
        for c, ch in enumerate(row):
            if ch in BLOCKED:
                occ[r, c] = True
            elif ch not in PASSABLE:
                raise MapParseError(lineno, f"unknown character {ch!r} at column {c}")
    return GridMap(w, h, occ, name)


def serialize_map(grid: GridMap) -> str:
    chars = np.where(grid.occupancy, "@", ".")
    body = "\n".join("".join(row) for row in chars)
    return _header(grid.width, grid.height) + body + "\n"


def load_map(path) -> GridMap:
    path = Path(path)
    return parse_map(path.read_text(), name=path.stem)


def save_map(grid: GridMap, path) -> None:
    Path(path).write_text(serialize_map(grid))


def splitmix64(seed: int, n: int) -> np.ndarray:
    """First ``n`` outputs of SplitMix64 seeded with ``seed``.

    Counter form of the generator: output i is ``mix(seed + (i+1)*0x9E3779B97F4A7C15)``
    with ``mix(z) = z ^= z>>30; z *= 0xBF58476D1CE4E5B9; z ^= z>>27;
    z *= 0x94D049BB133111EB; z ^= z>>31`` (all mod 2**64).
    """
    base = np.uint64(seed & _MASK64)
    i = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = base + i * np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return z


def generate_random_map(width: int, height: int, obstacle_pct: float, seed: int,
                        name: str | None = None) -> GridMap:
    """Each cell blocked independently with probability ``obstacle_pct/100``.

    Cell ``(x, y)`` uses SplitMix64 output ``y*width + x``; its top 53 bits
    form a uniform ``u`` in [0, 1) and the cell is blocked iff
    ``u < obstacle_pct/100``.
    """
    if width < 1 or height < 1:
        raise ValueError("width and height must be >= 1")
    if not 0 <= obstacle_pct <= 100:
        raise ValueError("obstacle_pct must be in [0, 100]")
    u = (splitmix64(seed, width * height) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    occ = (u < obstacle_pct / 100.0).reshape(height, width)
    if name is None:
        name = f"random{obstacle_pct:g}_{width}x{height}_s{seed}"
    return GridMap(width, height, occ, name)
