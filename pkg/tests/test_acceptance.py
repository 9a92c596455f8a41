"""End-to-end acceptance checks; each prints one PASS/FAIL line in the summary.

Slow ones (desk-scale benchmark, 100k-example training, K ablation) carry
the ``slow`` marker: ``pytest -m "not slow"`` skips them.
"""

import math
import time

import numpy as np
import pytest

from loha.bench import (ExperimentConfig, MapSource, ablate_k, aggregate, desk_scale_maps, read_rows,
                        report_markdown, run_experiment, write_rows)
from loha.domains import CarDomain, CarState, GridDomain, GridState
from loha.gridmap import GridMap, generate_random_map, load_map, save_map
from loha.learn import (collect_dataset, evaluate_loss, gradient_check, load_dataset, load_model, new_model,
                        save_dataset, save_model, train)
from loha.localheur import ExactLocalHeuristic, LocalRegionSpec, local_h_exact
from loha.search import focal_search, weighted_astar

from conftest import (CUL_DE_SAC_GOAL, CUL_DE_SAC_INTERIOR, CUL_DE_SAC_ROWS, CUL_DE_SAC_START,
                      random_grid_instance, record_criterion)
from oracles import dijkstra_cost, local_h_oracle


def _medians(rows, method):
    return {r.weight: r.median_reduction for r in aggregate(rows)["table"] if r.method == method}


def _noise(seed, scale=60.0):
    def h(s):
        r = np.random.default_rng(abs(hash((seed,) + tuple(s))) % (2**63))
        return math.inf if r.random() < 0.05 else float(r.random() * scale)
    return h


def test_c1_exact_hgk_is_admissible():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    ok = 0
    n = 200
    for i in range(n):
        m, s, g = random_grid_instance(rng, 24, [15, 25, 35][i % 3])
        d = GridDomain(m, g)
        K = [2, 3, 4][i % 3]
        res = weighted_astar(d, GridState(*s), ExactLocalHeuristic(d, K), 1.0)
        ok += res.cost == dijkstra_cost(d, GridState(*s))
    dt = time.perf_counter() - t0
    passed = ok == n and dt < 60
    record_criterion(1, "A* with exact h_gk is optimal", passed, f"{ok}/{n} optimal in {dt:.1f}s")
    assert passed


def test_c2_focal_bound():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    total = ok = 0
    for w in (1.5, 2.0, 8.0):
        for i in range(200):
            m, s, g = random_grid_instance(rng, 20, 25)
            d = GridDomain(m, g)
            c_star = dijkstra_cost(d, GridState(*s))
            # alternate adversarial noise, an anti-heuristic and the exact h_gk
            hf = [_noise(i), lambda x: -d.h(x) + 100, ExactLocalHeuristic(d, 3)][i % 3]
            res = focal_search(d, GridState(*s), d.h, hf, w, focal_weight=[1.0, w][i % 2])
            total += 1
            ok += res.solved and res.cost <= w * c_star
    dt = time.perf_counter() - t0
    passed = ok == total and dt < 120
    record_criterion(2, "focal search cost <= w*C*", passed, f"{ok}/{total} within bound in {dt:.1f}s")
    assert passed


def test_c3_local_oracle_equivalence():
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    bad = {"grid": 0, "car": 0}
    n = 1000
    for i in range(n):
        K = [2, 3, 4][i % 3]
        m = generate_random_map(20, 20, [15, 25, 35][(i // 3) % 3], 10_000 + i)
        free = np.argwhere(~m.occupancy)
        y, x = free[rng.integers(len(free))]
        gy, gx = free[rng.integers(len(free))]
        gd = GridDomain(m, (int(gx), int(gy)))
        gs = GridState(int(x), int(y))
        bad["grid"] += local_h_exact(gd, gs, LocalRegionSpec(K)).value != local_h_oracle(gd, gs, K)
        # keep some goals close so the in-window goal case is exercised
        if i % 4 == 0:
            gx, gy = int(np.clip(x + rng.integers(-3, 4), 0, 19)), int(np.clip(y + rng.integers(-3, 4), 0, 19))
        cd = CarDomain(m, (2 * int(gx), 2 * int(gy), 0, 0))
        cs = CarState(2 * int(x) + int(rng.integers(2)), 2 * int(y) + int(rng.integers(2)),
                      int(rng.integers(12)), int(rng.integers(-1, 4)))
        a = local_h_exact(cd, cs, LocalRegionSpec(K)).value
        b = local_h_oracle(cd, cs, K)
        bad["car"] += not (a == b == math.inf or abs(a - b) <= 1e-9)
    dt = time.perf_counter() - t0
    passed = bad == {"grid": 0, "car": 0} and dt < 300
    record_criterion(3, "local search matches exhaustive oracle", passed,
                     f"mismatches grid {bad['grid']}/{n}, car {bad['car']}/{n} in {dt:.1f}s")
    assert passed


def test_c4_cul_de_sac_regression():
    t0 = time.perf_counter()
    m = GridMap.from_rows(CUL_DE_SAC_ROWS, name="culdesac")
    d = GridDomain(m, CUL_DE_SAC_GOAL)
    s = GridState(*CUL_DE_SAC_START)
    base = weighted_astar(d, s, d.h, 2.0, record_expanded=True)
    tl = weighted_astar(d, s, ExactLocalHeuristic(d, 3), 2.0, record_expanded=True)
    dt = time.perf_counter() - t0
    inside_exp = sum((e.x, e.y) in CUL_DE_SAC_INTERIOR for e in tl.expanded_states)
    inside_path = sum((e.x, e.y) in CUL_DE_SAC_INTERIOR for e in tl.path)
    base_inside = sum((e.x, e.y) in CUL_DE_SAC_INTERIOR for e in base.expanded_states)
    passed = (tl.expansions < base.expansions and inside_exp == 0 and inside_path == 0
              and tl.path[-1] == base.path[-1] and dt < 1)
    record_criterion(4, "cul-de-sac skipped with h_g + h_k", passed,
                     f"expansions {base.expansions} -> {tl.expansions}, interior cells expanded "
                     f"{base_inside} -> {inside_exp}, {dt * 1000:.0f}ms")
    assert passed


@pytest.mark.slow
def test_c5_desk_scale_reduction():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(maps=desk_scale_maps(3, 0), domain="car", methods=("astar_tl",),
                           weights=(2.0, 8.0, 32.0, 128.0), K=4, seeds=(0, 1, 2), queries=10)
    rows = run_experiment(cfg)
    dt = time.perf_counter() - t0
    med = _medians(rows, "astar_tl")
    print(report_markdown(aggregate(rows)))
    passed = all(med[w] >= 2.0 for w in (8.0, 32.0, 128.0)) and med[128.0] >= med[2.0] and dt < 1800
    record_criterion(5, "A* w/TL desk-scale reduction", passed,
                     ", ".join(f"w{w:g} {v:.2f}" for w, v in sorted(med.items())) + f" in {dt:.0f}s")
    assert passed


@pytest.mark.slow
def test_c6_learned_heuristic(tmp_path):
    t0 = time.perf_counter()
    train_maps = [s.load() for s in desk_scale_maps(3, 0)]
    ds = collect_dataset(train_maps, 10_000, 4.0, 4, 100, 0, 100_000)
    t_collect = time.perf_counter() - t0
    tr, held = ds.split(0.1, 0)
    t1 = time.perf_counter()
    model, hist = train(tr, 100, 32, 1e-3, 0)
    t_train = time.perf_counter() - t1
    held_loss = evaluate_loss(model, held)
    save_model(model, tmp_path / "model.loha")
    test_src = [s for s in desk_scale_maps(0, 1)]
    cfg = ExperimentConfig(maps=test_src, domain="car", methods=("loha",), weights=(8.0, 32.0, 128.0),
                           K=4, seeds=(0, 1, 2), queries=10, model=str(tmp_path / "model.loha"))
    rows = run_experiment(cfg)
    med = _medians(rows, "loha")
    passed = (len(ds) >= 100_000 and held_loss <= 0.10 and max(med.values()) >= 1.5
              and t_train <= 3600)
    record_criterion(6, "learned heuristic quality", passed,
                     f"{len(ds)} examples ({len(ds) / t_collect:.0f}/s), held-out loss {held_loss:.4f}, "
                     f"train {t_train:.0f}s, LoHA* test-map medians "
                     + ", ".join(f"w{w:g} {v:.2f}" for w, v in sorted(med.items())))
    assert passed


def test_c7_gradient_check():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        K = [1, 2, 3][seed % 3]
        F = [2, 3, 4][seed % 3]
        model = new_model(K, F, seed)
        S = 2 * K + 1
        img = np.stack([rng.integers(0, 2, (S, S)).astype(float), rng.normal(size=(S, S))])
        worst = max(worst, gradient_check(model, img, rng.random(4), float(rng.uniform(0, 2 * K)), 1e-5))
    dt = time.perf_counter() - t0
    passed = worst < 1e-4 and dt < 60
    record_criterion(7, "analytic gradients match finite differences", passed,
                     f"max relative gap {worst:.2e} over 10 models in {dt:.1f}s")
    assert passed


@pytest.mark.slow
def test_c8_k_generalisation_trend():
    srcs = desk_scale_maps(3, 1, size=128)
    tr = [s.load() for s in srcs if s.split == "train"]
    te = [s.load() for s in srcs if s.split == "test"]
    seeds = (0, 1, 2)
    rows = ablate_k(tr, te, [2, 4, 6], seeds=seeds, examples=10_000, test_examples=3000, epochs=20,
                    queries_per_map=100)
    loss = {(r.K, r.seed): r.test_loss for r in rows}
    votes = sum(loss[6, s] >= loss[2, s] for s in seeds)
    passed = votes * 2 > len(seeds)
    mean = {K: np.mean([loss[K, s] for s in seeds]) for K in (2, 4, 6)}
    record_criterion(8, "test loss grows with K", passed,
                     f"K=6 >= K=2 on {votes}/{len(seeds)} seeds; mean test loss "
                     + ", ".join(f"K{K} {v:.4f}" for K, v in mean.items()))
    assert passed


def test_c9_determinism_and_formats(tmp_path):
    checks = {}
    cfg = ExperimentConfig(maps=[MapSource("train", random=(48, 48, 20, 5)),
                                 MapSource("test", random=(48, 48, 20, 6))],
                           domain="car", methods=("astar_tl",), weights=(2.0, 8.0), K=3, seeds=(0, 1),
                           queries=2)
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    checks["expansions"] = [(r.key(), r.method, r.expansions, r.generated, r.cost) for r in a] == \
        [(r.key(), r.method, r.expansions, r.generated, r.cost) for r in b]
    write_rows(a, tmp_path / "rows.csv")
    back = read_rows(tmp_path / "rows.csv")
    checks["csv"] = [(r.key(), r.method, r.expansions, r.generated, r.cost, r.status) for r in a] == \
        [(r.key(), r.method, r.expansions, r.generated, r.cost, r.status) for r in back]

    m = generate_random_map(37, 23, 30, 9)
    save_map(m, tmp_path / "m.map")
    checks["map"] = load_map(tmp_path / "m.map") == m

    maps = [generate_random_map(40, 40, 20, 1)]
    d1 = collect_dataset(maps, 5, 3.0, 3, 50, 4, 500)
    d2 = collect_dataset(maps, 5, 3.0, 3, 50, 4, 500)
    save_dataset(d1, tmp_path / "d.txt")
    checks["dataset"] = d1.equals(d2) and load_dataset(tmp_path / "d.txt").equals(d1)

    m1, h1 = train(d1, 2, 32, 1e-3, 3, F=4)
    m2, h2 = train(d2, 2, 32, 1e-3, 3, F=4)
    save_model(m1, tmp_path / "m.loha")
    m3 = load_model(tmp_path / "m.loha")
    checks["model"] = (h1 == h2 and all(np.array_equal(m1.params[k], m2.params[k]) for k in m1.params)
                       and all(m1.params[k].tobytes() == m3.params[k].tobytes() for k in m1.params))
    passed = all(checks.values())
    record_criterion(9, "determinism and format round-trips", passed,
                     ", ".join(f"{k} {'ok' if v else 'MISMATCH'}" for k, v in checks.items()))
    assert passed
