import numpy as np
import pytest

from loha.gridmap import GridMap, generate_random_map

_CRITERIA = []


def record_criterion(num, name, passed, detail=""):
    _CRITERIA.append((num, name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, passed, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {num}. {name}: {detail}")


# Cul-de-sac layout: a cup opening toward the start, straight on the
# line to the goal.
CUL_DE_SAC_ROWS = [
    "..............",
    "..............",
    ".....@@@@.....",
    "........@.....",
    "........@.....",
    "........@.....",
    ".....@@@@.....",
    "..............",
    "..............",
]
CUL_DE_SAC_START = (1, 4)
CUL_DE_SAC_GOAL = (12, 4)
CUL_DE_SAC_INTERIOR = {(x, y) for x in range(5, 8) for y in range(3, 6)}


@pytest.fixture
def cul_de_sac():
    return GridMap.from_rows(CUL_DE_SAC_ROWS, name="culdesac")


@pytest.fixture
def open3():
    return GridMap.empty(3, 3)


def random_grid_instance(rng, size=16, pct=25, need_path=True):
    """Random map and a start/goal pair in the same 4-connected component."""
    from loha.scenarios import grid_components

    while True:
        m = generate_random_map(size, size, pct, int(rng.integers(2**32)))
        free = np.argwhere(~m.occupancy)
        if len(free) < 2:
            continue
        a = free[rng.integers(len(free))]
        b = free[rng.integers(len(free))]
        if need_path:
            comp = grid_components(m)
            if comp[a[0], a[1]] != comp[b[0], b[1]]:
                continue
        return m, (int(a[1]), int(a[0])), (int(b[1]), int(b[0]))
