"""Training data: collection by search and the text file format.

File format::

    loha-dataset v1 K=<K>
    # <free-form provenance, optional, any number of lines>
    <obstacles> <dh> <state> <target>

one record per line, four whitespace-separated fields:

* ``obstacles``: (2K+1)**2 characters ``0``/``1``, row-major
* ``dh``: (2K+1)**2 comma-separated decimals, row-major
* ``state``: 4 comma-separated decimals
* ``target``: decimal h_k (dead ends already replaced by 2K)

Decimals are written with 9 significant digits, which reproduces the
float32 values held in memory exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..domains import make_domain
from ..localheur import ExactLocalHeuristic
from ..scenarios import generate_scenarios
from ..search import weighted_astar
from .features import FeatureExtractor

log = logging.getLogger(__name__)

HEADER = "loha-dataset v1 K="


class DatasetFormatError(ValueError):
    pass


@dataclass(eq=False)
class Dataset:
    K: int
    obstacles: np.ndarray  # (N, S, S) uint8
    dh: np.ndarray  # (N, S, S) float32
    states: np.ndarray  # (N, 4) float32
    targets: np.ndarray  # (N,) float32
    provenance: list = field(default_factory=list)

    def __post_init__(self):
        S = 2 * self.K + 1
        n = len(self.targets)
        self.obstacles = np.asarray(self.obstacles, dtype=np.uint8).reshape(n, S, S)
        self.dh = np.asarray(self.dh, dtype=np.float32).reshape(n, S, S)
        self.states = np.asarray(self.states, dtype=np.float32).reshape(n, 4)
        self.targets = np.asarray(self.targets, dtype=np.float32).reshape(n)

    def __len__(self):
        return len(self.targets)

    def images(self, idx=slice(None)) -> np.ndarray:
        return np.stack([self.obstacles[idx], self.dh[idx]], axis=1).astype(np.float64)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.K, self.obstacles[idx], self.dh[idx], self.states[idx], self.targets[idx],
                       list(self.provenance))

    def split(self, frac: float, seed: int = 0):
        """Random ``(first, second)`` split with ``frac`` of rows in the second."""
        order = np.random.default_rng(seed).permutation(len(self))
        cut = len(self) - int(round(frac * len(self)))
        return self.subset(np.sort(order[:cut])), self.subset(np.sort(order[cut:]))

    def equals(self, other) -> bool:
        return (self.K == other.K and np.array_equal(self.obstacles, other.obstacles)
                and np.array_equal(self.dh, other.dh) and np.array_equal(self.states, other.states)
                and np.array_equal(self.targets, other.targets))

    @classmethod
    def empty(cls, K: int) -> "Dataset":
        S = 2 * K + 1
        return cls(K, np.zeros((0, S, S)), np.zeros((0, S, S)), np.zeros((0, 4)), np.zeros(0))

    @classmethod
    def concat(cls, parts) -> "Dataset":
        parts = list(parts)
        K = parts[0].K
        if any(p.K != K for p in parts):
            raise ValueError("cannot concatenate datasets with different K")
        return cls(K, np.concatenate([p.obstacles for p in parts]), np.concatenate([p.dh for p in parts]),
                   np.concatenate([p.states for p in parts]), np.concatenate([p.targets for p in parts]),
                   [line for p in parts for line in p.provenance])


def hk_target(value: float, K: int) -> float:
    """Regression target: dead ends (inf) and anything above 2K become 2K."""
    return min(float(value), 2.0 * K)


def collect_dataset(maps, queries_per_map: int, w: float, K: int, cap: int | None, seed: int,
                    target_size: int, domain_kind: str = "car", min_separation: float | None = None,
                    expansion_limit: int = 20_000) -> Dataset:
    """Run weighted A* on ``h_g + h_k`` (capped local search) and keep every
    expanded state with its local-heuristic value.

    Queries are taken round-robin over ``maps``; query ``q`` on map ``i`` is
    sampled with seed ``(seed, i, q)``.  Stops at ``target_size`` examples
    or when every map has run ``queries_per_map`` queries.
    """
    if not maps:
        raise ValueError("need at least one map")
    S = 2 * K + 1
    obs = np.zeros((target_size, S, S), np.uint8)
    dh = np.zeros((target_size, S, S), np.float32)
    st = np.zeros((target_size, 4), np.float32)
    tg = np.zeros(target_size, np.float32)
    n = 0
    prov = [f"domain={domain_kind} w={w:g} K={K} cap={cap} seed={seed}"]
    for q in range(queries_per_map):
        for i, grid in enumerate(maps):
            if n >= target_size:
                break
            sep = min_separation if min_separation is not None else grid.width / 4
            qseed = int(np.random.SeedSequence([seed, i, q]).generate_state(1)[0])
            pairs = generate_scenarios(grid, domain_kind, 1, qseed, sep)
            if not pairs:
                log.warning("%s: skipping query %d (no solvable pair)", grid.name, q)
                continue
            start, goal = pairs[0]
            dom = make_domain(domain_kind, grid, goal)
            heur = ExactLocalHeuristic(dom, K, cap)
            res = weighted_astar(dom, start, heur, w, expansion_limit, record_expanded=True)
            fx = FeatureExtractor(dom, K)
            for s in res.expanded_states:
                if n >= target_size:
                    break
                o, d, x = fx.arrays(s)
                obs[n], dh[n], st[n] = o, d, x
                tg[n] = hk_target(heur.local(s).value, K)
                n += 1
            prov.append(f"{grid.name} q={q} start={tuple(start)} goal={tuple(goal)} "
                        f"status={res.status} expanded={res.expansions}")
        if n >= target_size:
            break
    return Dataset(K, obs[:n], dh[:n], st[:n], tg[:n], prov)


def _fmt(values) -> str:
    return ",".join(format(float(v), ".9g") for v in values)


def save_dataset(ds: Dataset, path) -> None:
    with open(path, "w") as f:
        f.write(f"{HEADER}{ds.K}\n")
        for line in ds.provenance:
            f.write(f"# {line}\n")
        for i in range(len(ds)):
            o = "".join("1" if c else "0" for c in ds.obstacles[i].reshape(-1))
            f.write(f"{o} {_fmt(ds.dh[i].reshape(-1))} {_fmt(ds.states[i])} {format(float(ds.targets[i]), '.9g')}\n")


def load_dataset(path) -> Dataset:
    path = Path(path)
    with open(path) as f:
        first = f.readline().rstrip("\n")
        if not first.startswith(HEADER):
            raise DatasetFormatError(f"{path}:1: expected header '{HEADER}<K>'")
        try:
            K = int(first[len(HEADER):])
        except ValueError:
            raise DatasetFormatError(f"{path}:1: bad K in header") from None
        S2 = (2 * K + 1) ** 2
        prov, obs, dh, st, tg = [], [], [], [], []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                prov.append(line[1:].strip())
                continue
            parts = line.split()
            if len(parts) != 4:
                raise DatasetFormatError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            o, d, x, t = parts
            if len(o) != S2 or set(o) - {"0", "1"}:
                raise DatasetFormatError(f"{path}:{lineno}: bad obstacle field")
            try:
                dv = np.array(d.split(","), dtype=np.float32)
                xv = np.array(x.split(","), dtype=np.float32)
                tv = np.float32(t)
            except ValueError:
                raise DatasetFormatError(f"{path}:{lineno}: bad number") from None
            if dv.size != S2 or xv.size != 4:
                raise DatasetFormatError(f"{path}:{lineno}: wrong field length")
            obs.append(np.frombuffer(o.encode(), np.uint8) - ord("0"))
            dh.append(dv)
            st.append(xv)
            tg.append(tv)
    if not tg:
        ds = Dataset.empty(K)
        ds.provenance = prov
        return ds
    return Dataset(K, np.array(obs), np.array(dh), np.array(st), np.array(tg), prov)
