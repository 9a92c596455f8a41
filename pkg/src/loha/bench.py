"""Experiment harness: method x weight x map grids, median node reduction,
and the K ablation.

Methods
-------
``wastar``    weighted A*, ``f = g + w*h_g`` (the baseline)
``astar_tl``  weighted A*, ``f = g + w*(h_g + exact h_k)``
``loha``      focal search, OPEN on ``h_g``, FOCAL on ``h_g + predicted h_k``, bound ``w``

Scenarios for map ``m`` and seed ``s`` are sampled with seed
``crc32(m.name) ^ s`` (so they do not depend on map order) and every
method/weight runs on the same pairs.  Reduction for a query is baseline
expansions divided by method expansions on the identical (map, seed, query,
weight); the report gives the median per (map type, split, method, weight).
Rows that are not ``solved`` on either side are left out of the medians and
counted.
"""

from __future__ import annotations

import csv
import logging
import math
import statistics
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .domains import make_domain
from .gridmap import GridMap, generate_random_map, load_map
from .localheur import ExactLocalHeuristic
from .scenarios import generate_scenarios
from .search import SOLVED, focal_search, weighted_astar

log = logging.getLogger(__name__)

METHODS = ("wastar", "astar_tl", "loha")
BASELINE = "wastar"
CSV_FIELDS = ("map", "split", "method", "weight", "seed", "query", "expansions", "generated",
              "cost", "elapsed_s", "status")


@dataclass(frozen=True)
class MapSource:
    """A map file or a random-map recipe ``(width, height, pct, seed)``."""

    split: str = "train"
    path: str | None = None
    random: tuple | None = None

    def load(self) -> GridMap:
        if self.path is not None:
            return load_map(self.path)
        w, h, pct, seed = self.random
        return generate_random_map(int(w), int(h), float(pct), int(seed))


@dataclass
class ExperimentConfig:
    maps: list = field(default_factory=list)
    domain: str = "car"
    methods: tuple = ("wastar", "astar_tl")
    weights: tuple = (2.0, 8.0, 32.0, 128.0)
    K: int = 4
    seeds: tuple = (0, 1, 2)
    queries: int = 10
    expansion_limit: int = 2_000_000
    model: str | None = None
    cap: int | None = None  # local expansion cap for astar_tl; None = exact
    min_separation: float | None = None  # default: map width / 2

    def validate(self) -> None:
        if not self.maps:
            raise ValueError("at least one map is required")
        if not self.methods:
            raise ValueError("at least one method is required")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        if any(w < 1 for w in self.weights):
            raise ValueError("weights must be >= 1")
        if "loha" in self.methods and not self.model:
            raise ValueError("method 'loha' needs a model path")
        if self.domain not in ("grid", "car"):
            raise ValueError(f"unknown domain {self.domain!r}")


@dataclass
class ResultRow:
    map: str
    split: str
    method: str
    weight: float
    seed: int
    query: int
    expansions: int
    generated: int
    cost: float
    elapsed_s: float
    status: str

    def key(self):
        return (self.map, self.split, self.weight, self.seed, self.query)


def map_type(name: str) -> str:
    """Group label for the report: the map name up to the first ``_``."""
    return name.split("_")[0]


def scenario_seed(map_name: str, seed: int) -> int:
    return zlib.crc32(map_name.encode()) ^ int(seed)


def run_method(method: str, domain, start, w: float, K: int, limit: int, model=None, cap=None):
    if method == "wastar":
        return weighted_astar(domain, start, domain.h, w, limit)
    if method == "astar_tl":
        return weighted_astar(domain, start, ExactLocalHeuristic(domain, K, cap), w, limit)
    if method == "loha":
        from .learn.heuristic import LearnedLocalHeuristic
        return focal_search(domain, start, domain.h, LearnedLocalHeuristic(domain, model), w, limit,
                            focal_weight=w)
    raise ValueError(f"unknown method {method!r}")


def run_queries(grid: GridMap, split: str, domain_kind: str, pairs, methods, weights, seed: int,
                K: int, limit: int, model=None, cap=None) -> list:
    rows = []
    for qi, (start, goal) in enumerate(pairs):
        dom = make_domain(domain_kind, grid, goal)
        for w in weights:
            for method in methods:
                try:
                    r = run_method(method, dom, start, w, K, limit, model, cap)
                    rows.append(ResultRow(grid.name, split, method, float(w), seed, qi, r.expansions,
                                          r.generated, r.cost, r.elapsed, r.status))
                except Exception as e:  # recorded, never aborts the grid
                    log.error("%s q%d %s w=%g failed: %s", grid.name, qi, method, w, e)
                    rows.append(ResultRow(grid.name, split, method, float(w), seed, qi, 0, 0,
                                          math.inf, 0.0, f"error: {type(e).__name__}"))
    return rows


def run_experiment(config: ExperimentConfig, progress=None) -> list:
    config.validate()
    model = None
    if "loha" in config.methods:
        from .learn.network import load_model
        model = load_model(config.model)
        if model.K != config.K:
            raise ValueError(f"model K={model.K} does not match config K={config.K}")
    methods = list(config.methods)
    if BASELINE not in methods:
        methods.insert(0, BASELINE)
    rows = []
    for src in config.maps:
        grid = src.load()
        for seed in config.seeds:
            pairs = generate_scenarios(grid, config.domain, config.queries,
                                       scenario_seed(grid.name, seed), config.min_separation)
            part = run_queries(grid, src.split, config.domain, pairs, methods, config.weights, seed,
                               config.K, config.expansion_limit, model, config.cap)
            rows.extend(part)
            if progress is not None:
                progress(grid.name, seed, part)
    return rows


def reductions(rows) -> dict:
    """``{(map_type, split, method, weight): [reduction, ...]}`` and exclusion counts."""
    base = {}
    for r in rows:
        if r.method == BASELINE:
            base[r.key()] = r
    out, excluded, unpaired = {}, {}, 0
    for r in rows:
        gk = (map_type(r.map), r.split, r.method, r.weight)
        b = base.get(r.key())
        if b is None:
            unpaired += 1
            continue
        if r.status != SOLVED or b.status != SOLVED or r.expansions <= 0:
            excluded[gk] = excluded.get(gk, 0) + 1
            continue
        out.setdefault(gk, []).append(b.expansions / r.expansions)
    if unpaired:
        log.warning("%d rows have no baseline pairing and were excluded", unpaired)
    return out, excluded


@dataclass
class ReportRow:
    map_type: str
    split: str
    method: str
    weight: float
    median_reduction: float
    n: int
    excluded: int


def aggregate(rows) -> dict:
    """Median reduction per group plus expansions-per-second per method."""
    red, excl = reductions(rows)
    table = []
    for gk in sorted(set(red) | set(excl), key=lambda k: (k[0], k[1] != "train", METHODS.index(k[2]), k[3])):
        vals = red.get(gk, [])
        med = statistics.median(vals) if vals else math.nan
        table.append(ReportRow(*gk, med, len(vals), excl.get(gk, 0)))
    speed = {}
    for m in sorted({r.method for r in rows}, key=METHODS.index):
        exp = sum(r.expansions for r in rows if r.method == m)
        t = sum(r.elapsed_s for r in rows if r.method == m)
        speed[m] = exp / t if t > 0 else math.nan
    return {"table": table, "expansions_per_second": speed}


def report_markdown(report: dict) -> str:
    table = report["table"]
    weights = sorted({r.weight for r in table})
    groups = {}
    for r in table:
        groups.setdefault((r.map_type, r.split, r.method), {})[r.weight] = r
    head = "| Map Type | Split | Method | " + " | ".join(f"w{w:g}" for w in weights) + " |"
    sep = "|" + "---|" * (3 + len(weights))
    lines = [head, sep]
    for (mt, split, method), byw in groups.items():
        cells = []
        for w in weights:
            r = byw.get(w)
            cells.append("-" if r is None or math.isnan(r.median_reduction) else f"{r.median_reduction:.2f}")
        label = {"astar_tl": "A* w/TL", "loha": "LoHA*", "wastar": "wA*"}[method]
        lines.append(f"| {mt} | {split.capitalize()} | {label} | " + " | ".join(cells) + " |")
    lines.append("")
    lines.append("Expansions per second: " + ", ".join(
        f"{m} {v:,.0f}" for m, v in report["expansions_per_second"].items()))
    return "\n".join(lines) + "\n"


def report_csv(report: dict, path) -> None:
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["map_type", "split", "method", "weight", "median_reduction", "n", "excluded"])
        for r in report["table"]:
            wr.writerow([r.map_type, r.split, r.method, f"{r.weight:g}", f"{r.median_reduction:.6g}", r.n, r.excluded])


def write_rows(rows, path) -> None:
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(CSV_FIELDS)
        for r in rows:
            d = asdict(r)
            d["weight"] = f"{r.weight:g}"
            d["cost"] = f"{r.cost:g}" if math.isfinite(r.cost) else "inf"
            d["elapsed_s"] = f"{r.elapsed_s:.6f}"
            wr.writerow([d[k] for k in CSV_FIELDS])


def read_rows(path) -> list:
    with open(path, newline="") as f:
        rd = csv.DictReader(f)
        if tuple(rd.fieldnames or ()) != CSV_FIELDS:
            raise ValueError(f"{path}: header must be {','.join(CSV_FIELDS)}")
        rows = []
        for rec in rd:
            rows.append(ResultRow(
                map=rec["map"], split=rec["split"], method=rec["method"], weight=float(rec["weight"]),
                seed=int(rec["seed"]), query=int(rec["query"]), expansions=int(rec["expansions"]),
                generated=int(rec["generated"]), cost=float(rec["cost"]), elapsed_s=float(rec["elapsed_s"]),
                status=rec["status"]))
    return rows


@dataclass
class AblationRow:
    K: int
    seed: int
    train_loss: float
    test_loss: float
    n_train: int


def ablate_k(train_maps, test_maps, Ks, seeds=(0,), domain_kind: str = "car", examples: int = 20_000,
             test_examples: int = 5_000, epochs: int = 20, batch_size: int = 32, lr: float = 1e-3,
             w: float = 4.0, cap: int | None = 100, queries_per_map: int = 200, holdout: float = 0.2,
             progress=None) -> list:
    """Train one model per (K, seed) and report held-out loss on train-map
    and test-map data."""
    from .learn.dataset import collect_dataset
    from .learn.network import evaluate_loss, train

    if not Ks:
        raise ValueError("K list must be nonempty")
    out = []
    for K in Ks:
        for seed in seeds:
            ds = collect_dataset(train_maps, queries_per_map, w, K, cap, seed, examples, domain_kind)
            tr, held = ds.split(holdout, seed)
            te = collect_dataset(test_maps, queries_per_map, w, K, cap, seed + 10_000, test_examples,
                                 domain_kind)
            model, _ = train(tr, epochs, batch_size, lr, seed)
            row = AblationRow(K, seed, evaluate_loss(model, held), evaluate_loss(model, te), len(tr))
            out.append(row)
            if progress is not None:
                progress(row)
    return out


def ablation_table(rows) -> str:
    lines = ["| K | seed | train loss | test loss |", "|---|---|---|---|"]
    for r in rows:
        lines.append(f"| {r.K} | {r.seed} | {r.train_loss:.4f} | {r.test_loss:.4f} |")
    by_k = {}
    for r in rows:
        by_k.setdefault(r.K, []).append(r)
    lines.append("")
    lines.append("| K | mean train loss | mean test loss |")
    lines.append("|---|---|---|")
    for K, rs in sorted(by_k.items()):
        lines.append(f"| {K} | {np.mean([r.train_loss for r in rs]):.4f} | {np.mean([r.test_loss for r in rs]):.4f} |")
    return "\n".join(lines) + "\n"


def write_ablation_csv(rows, path) -> None:
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["K", "seed", "train_loss", "test_loss", "n_train"])
        for r in rows:
            wr.writerow([r.K, r.seed, f"{r.train_loss:.6g}", f"{r.test_loss:.6g}", r.n_train])


def desk_scale_maps(n_train: int = 3, n_test: int = 1, size: int = 256, pct: float = 20,
                    seed0: int = 0) -> list:
    """Random-map sources: ``n_train`` train maps then ``n_test`` test maps."""
    srcs = [MapSource("train", random=(size, size, pct, seed0 + i)) for i in range(n_train)]
    srcs += [MapSource("test", random=(size, size, pct, seed0 + 100 + i)) for i in range(n_test)]
    return srcs
