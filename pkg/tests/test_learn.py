import numpy as np
import pytest

from loha.domains import CarDomain, CarState, GridDomain, GridState
from loha.gridmap import GridMap, generate_random_map
from loha.learn import (Dataset, FeatureExtractor, LearnedLocalHeuristic, Model, ModelLoadError,
                        collect_dataset, evaluate_loss, extract_features, gradient_check, hk_target,
                        load_dataset, load_model, new_model, predict_hk, save_dataset, save_model, train)
from loha.learn.dataset import DatasetFormatError
from loha.learn.network import forward, init_params, loss_and_grads, param_shapes


def _toy_dataset(n=100, K=2, seed=0, zero=False):
    rng = np.random.default_rng(seed)
    S = 2 * K + 1
    obs = rng.integers(0, 2, (n, S, S))
    dh = rng.normal(size=(n, S, S))
    st = rng.random((n, 4))
    tg = np.zeros(n) if zero else rng.uniform(0, 2 * K, n)
    return Dataset(K, obs, dh, st, tg)


# features

def test_features_empty_map_padding():
    m = GridMap.empty(10, 10)
    d = CarDomain(m, (100, 100, 0, 0))
    inp = extract_features(d, CarState(4, 4, 3, 1), 4)  # cell (2, 2)
    assert inp.obstacles.shape == (9, 9)
    # columns/rows for offsets -4, -3 fall off the map
    assert inp.obstacles[:2].all() and inp.obstacles[:, :2].all()
    assert not inp.obstacles[2:, 2:].any()


def test_features_blocked_except_center():
    occ = np.ones((9, 9), dtype=bool)
    occ[4, 4] = False
    d = GridDomain(GridMap(9, 9, occ), (0, 0))
    inp = extract_features(d, GridState(4, 4), 3)
    expect = np.ones((7, 7), dtype=np.uint8)
    expect[3, 3] = 0
    assert np.array_equal(inp.obstacles, expect)
    assert np.array_equal(inp.state, np.zeros(4))


def test_features_layout_and_dh():
    m = generate_random_map(20, 20, 30, 2)
    goal = (39, 1, 0, 0)
    d = CarDomain(m, goal)
    s = CarState(21, 20, 5, 2)  # position (10.5, 10.0), cell (10, 10)
    inp = extract_features(d, s, 3)
    for i in range(7):
        for j in range(7):
            cx, cy = 10 + j - 3, 10 + i - 3
            assert inp.obstacles[i, j] == m.is_blocked(cx, cy)
            want = np.hypot(cx + 0.5 - 19.5, cy + 0.5 - 0.5) / 3 - d.h(s)
            assert inp.dh[i, j] == pytest.approx(want, abs=1e-12)
    # center entry bounded by half the cell diagonal / 3
    assert abs(inp.dh[3, 3]) <= np.sqrt(2) / 3
    assert np.allclose(inp.state, [0.5, 0.0, 5 / 12, 3 / 5])
    assert np.all((inp.state >= 0) & (inp.state < 1))


def test_features_translation_invariance():
    rng = np.random.default_rng(0)
    for i in range(20):
        m = generate_random_map(30, 30, 25, i)
        occ = np.ones((37, 37), dtype=bool)
        occ[7:, 7:] = m.occupancy
        big = GridMap(37, 37, occ)
        free = np.argwhere(~m.occupancy)
        y, x = free[rng.integers(len(free))]
        s = CarState(2 * int(x) + 1, 2 * int(y), int(rng.integers(12)), int(rng.integers(-1, 4)))
        a = extract_features(CarDomain(m, (400, 300, 0, 0)), s, 4)
        b = extract_features(CarDomain(big, (414, 314, 0, 0)), CarState(s.x2 + 14, s.y2 + 14, s.theta, s.v), 4)
        assert a == b


# network

def test_param_shapes():
    sh = param_shapes(4, 8)
    assert sh["fc1_w"] == (8 * 49 + 4, 100)
    assert sh["fc2_w"] == (100, 100)
    assert sh["out_w"] == (100, 1)


def test_zero_model_predicts_zero():
    p = {k: np.zeros(s) for k, s in param_shapes(2, 2).items()}
    m = Model(2, 2, p)
    inp = extract_features(GridDomain(GridMap.empty(5, 5), (4, 4)), GridState(0, 0), 2)
    assert predict_hk(m, inp) == 0.0


def test_prediction_clamped_at_2k():
    K = 2
    p = {k: np.zeros(s) for k, s in param_shapes(K, 2).items()}
    p["out_b"] = np.array([np.log(2 * K + 1)])
    inp = extract_features(GridDomain(GridMap.empty(5, 5), (4, 4)), GridState(0, 0), K)
    assert predict_hk(Model(K, 2, dict(p)), inp) == pytest.approx(2 * K)
    p["out_b"] = np.array([10.0])
    assert predict_hk(Model(K, 2, dict(p)), inp) == 2 * K
    p["out_b"] = np.array([-10.0])
    assert predict_hk(Model(K, 2, dict(p)), inp) == 0.0


def test_predict_k_mismatch():
    m = new_model(3, 2)
    inp = extract_features(GridDomain(GridMap.empty(5, 5), (4, 4)), GridState(0, 0), 2)
    with pytest.raises(ValueError):
        predict_hk(m, inp)


@pytest.mark.parametrize("seed", range(3))
def test_gradient_check_small_model(seed):
    rng = np.random.default_rng(seed)
    m = new_model(2, 2, seed)
    img = rng.normal(size=(2, 5, 5))
    st = rng.random(4)
    assert gradient_check(m, img, st, 1.7, 1e-5) < 1e-4


def test_gradient_check_zero_input():
    m = new_model(2, 2, 0)
    assert np.isfinite(gradient_check(m, np.zeros((2, 5, 5)), np.zeros(4), 0.0, 1e-5))


def test_gradient_check_epsilon_range():
    m = new_model(2, 2, 0)
    with pytest.raises(ValueError):
        gradient_check(m, np.zeros((2, 5, 5)), np.zeros(4), 0.0, 1e-2)


def test_batch_gradient_is_mean_of_singles():
    rng = np.random.default_rng(1)
    p = init_params(2, 3, 1)
    imgs = rng.normal(size=(4, 2, 5, 5))
    sts = rng.random((4, 4))
    y = rng.random(4)
    _, g = loss_and_grads(p, imgs, sts, y)
    singles = [loss_and_grads(p, imgs[i:i + 1], sts[i:i + 1], y[i:i + 1])[1] for i in range(4)]
    for k in g:
        assert np.allclose(g[k], np.mean([s[k] for s in singles], axis=0))


def test_train_memorises_single_example():
    ds = _toy_dataset(1, 2, 0)
    _, hist = train(ds, epochs=300, batch_size=1, learning_rate=1e-3, seed=0, F=2)
    assert hist[-1] < 1e-4


def test_train_zero_targets():
    ds = _toy_dataset(64, 2, 1, zero=True)
    model, hist = train(ds, epochs=40, batch_size=16, seed=0, F=2)
    assert hist[-1] < 1e-3
    out = model.forward(ds.images(), ds.states)
    assert np.abs(out).max() < 0.1


def test_train_loss_nonincreasing_small_lr():
    ds = _toy_dataset(100, 2, 2)
    _, hist = train(ds, epochs=30, batch_size=10, learning_rate=1e-4, seed=0, F=2)
    for a, b in zip(hist, hist[1:]):
        assert b <= a + 1e-3


def test_train_deterministic():
    ds = _toy_dataset(50, 2, 3)
    m1, h1 = train(ds, 3, 8, seed=5, F=2)
    m2, h2 = train(ds, 3, 8, seed=5, F=2)
    assert h1 == h2
    for k in m1.params:
        assert np.array_equal(m1.params[k], m2.params[k])


def test_train_empty_rejected():
    with pytest.raises(ValueError):
        train(Dataset.empty(2), 1)


def test_train_nonfinite_aborts():
    ds = _toy_dataset(8, 2, 4)
    ds.dh[0, 0, 0] = np.inf
    with pytest.raises(FloatingPointError):
        train(ds, 1, 8, F=2)


# model io

def test_model_roundtrip(tmp_path):
    m = new_model(3, 4, 7)
    p = tmp_path / "m.loha"
    save_model(m, p)
    m2 = load_model(p)
    assert (m2.K, m2.F) == (3, 4)
    for k in m.params:
        assert m.params[k].tobytes() == m2.params[k].tobytes()
    rng = np.random.default_rng(0)
    imgs, sts = rng.normal(size=(20, 2, 7, 7)), rng.random((20, 4))
    assert np.array_equal(m.forward(imgs, sts), m2.forward(imgs, sts))


def test_model_header_layout(tmp_path):
    p = tmp_path / "m.loha"
    save_model(new_model(2, 3), p)
    raw = p.read_bytes()
    assert raw[:4] == b"LOHA" and raw[4] == 1
    assert int.from_bytes(raw[5:9], "little") == 2
    assert int.from_bytes(raw[9:13], "little") == 3
    assert int.from_bytes(raw[13:17], "little") == 3 * 2 * 9


@pytest.mark.parametrize("mutate", [
    lambda b: b[:-3],
    lambda b: b[:20],
    lambda b: b"XXXX" + b[4:],
    lambda b: b[:4] + b"\x07" + b[5:],
    lambda b: b + b"\x00",
])
def test_model_load_errors(tmp_path, mutate):
    p = tmp_path / "m.loha"
    save_model(new_model(2, 2), p)
    p.write_bytes(mutate(p.read_bytes()))
    with pytest.raises(ModelLoadError):
        load_model(p)


# dataset

def test_dataset_roundtrip(tmp_path):
    ds = _toy_dataset(30, 2, 5)
    ds.provenance = ["toy data", "second line"]
    p = tmp_path / "d.txt"
    save_dataset(ds, p)
    ds2 = load_dataset(p)
    assert ds.equals(ds2)
    assert ds2.provenance == ds.provenance
    assert p.read_text().startswith("loha-dataset v1 K=2\n")


def test_dataset_format_errors(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("not a dataset\n")
    with pytest.raises(DatasetFormatError):
        load_dataset(p)
    p.write_text("loha-dataset v1 K=1\n000000000 1,2 0,0,0,0 1\n")
    with pytest.raises(DatasetFormatError):
        load_dataset(p)


def test_hk_target():
    assert hk_target(float("inf"), 4) == 8
    assert hk_target(9.5, 4) == 8
    assert hk_target(1.25, 4) == 1.25


def test_collect_empty_target():
    ds = collect_dataset([GridMap.empty(20, 20)], 3, 2.0, 2, 100, 0, 0)
    assert len(ds) == 0


def test_collect_empty_map_all_zero():
    # on the grid Manhattan distance is exact without obstacles
    ds = collect_dataset([GridMap.empty(32, 32)], 3, 2.0, 3, 100, 0, 300, domain_kind="grid")
    assert len(ds) > 0
    assert np.all(ds.targets == 0)


def test_collect_empty_map_car_bounded():
    # the car pays for acceleration and turning, so targets are small but not zero
    ds = collect_dataset([GridMap.empty(32, 32)], 3, 2.0, 3, 100, 0, 300)
    assert np.all(ds.targets < 6)


def test_collect_deterministic_and_bounded():
    maps = [generate_random_map(48, 48, 25, s) for s in range(2)]
    a = collect_dataset(maps, 4, 3.0, 3, 50, 9, 400)
    b = collect_dataset(maps, 4, 3.0, 3, 50, 9, 400)
    assert a.equals(b)
    assert np.all((a.targets >= 0) & (a.targets <= 6))
    assert np.all(a.obstacles[:, 3, 3] == 0)


def test_collect_grid_domain():
    maps = [generate_random_map(32, 32, 30, 1)]
    ds = collect_dataset(maps, 3, 2.0, 2, None, 0, 200, domain_kind="grid")
    assert len(ds) > 0
    assert np.all(ds.states == 0)


def test_evaluate_loss_matches_forward():
    ds = _toy_dataset(20, 2, 6)
    m = new_model(2, 2, 1)
    y = np.log1p(ds.targets.astype(np.float64))
    want = np.mean((m.forward(ds.images(), ds.states) - y) ** 2)
    assert evaluate_loss(m, ds) == pytest.approx(want)


def test_learned_heuristic_in_range():
    m = generate_random_map(30, 30, 20, 0)
    d = CarDomain(m, (50, 50, 0, 0))
    model = new_model(3, 2, 0)
    H = LearnedLocalHeuristic(d, model)
    fx = FeatureExtractor(d, 3)
    free = np.argwhere(~m.occupancy)
    for y, x in free[:30]:
        s = CarState(2 * int(x), 2 * int(y), 0, 0)
        v = H.local(s)
        assert 0 <= v <= 6
        assert v == pytest.approx(predict_hk(model, fx(s)))
        assert H(s) == pytest.approx(d.h(s) + v)
