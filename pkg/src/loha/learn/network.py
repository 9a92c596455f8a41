"""Small conv + MLP regressor for ``log(h_k + 1)``, written out in numpy.

Architecture (S = 2K+1, P = (S-2)**2 valid 3x3 positions)::

    image (2, S, S) --conv 3x3, F filters, ReLU--> (P, F), flattened row, col, filter
    concat invariant state (4)                    -> F*P + 4
    fc1 100, ReLU -> fc2 100, ReLU -> out 1       -> y  (predicts log(h_k + 1))

Training minimises the batch mean of ``(y - log(target + 1))**2`` with Adam:
``m = b1*m + (1-b1)*g``, ``v = b2*v + (1-b2)*g*g``,
``p -= lr * (m / (1-b1**t)) / (sqrt(v / (1-b2**t)) + eps)``
with ``b1 = 0.9``, ``b2 = 0.999``, ``eps = 1e-8``.

Model file layout (little-endian): ``b"LOHA"``, version byte (1), ``K`` and
``F`` as uint32, then for each array in :data:`PARAM_ORDER` a uint32 element
count followed by that many float32 values in C order.
"""

from __future__ import annotations

import io
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

HIDDEN = 100
KERNEL = 3
MAGIC = b"LOHA"
FORMAT_VERSION = 1
PARAM_ORDER = ("conv_w", "conv_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b", "out_w", "out_b")


class ModelLoadError(ValueError):
    pass


def param_shapes(K: int, F: int) -> dict:
    S = 2 * K + 1
    P = (S - KERNEL + 1) ** 2
    return {
        "conv_w": (F, 2, KERNEL, KERNEL),
        "conv_b": (F,),
        "fc1_w": (F * P + 4, HIDDEN),
        "fc1_b": (HIDDEN,),
        "fc2_w": (HIDDEN, HIDDEN),
        "fc2_b": (HIDDEN,),
        "out_w": (HIDDEN, 1),
        "out_b": (1,),
    }


@dataclass(eq=False)
class Model:
    """Network weights (float32, the on-disk precision) plus ``K`` and ``F``."""

    K: int
    F: int
    params: dict = field(repr=False)

    def __post_init__(self):
        shapes = param_shapes(self.K, self.F)
        for name in PARAM_ORDER:
            arr = np.asarray(self.params[name], dtype=np.float32)
            if arr.shape != shapes[name]:
                raise ValueError(f"{name}: shape {arr.shape} != {shapes[name]}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name}: non-finite weights")
            self.params[name] = arr

    def params64(self) -> dict:
        return {k: v.astype(np.float64) for k, v in self.params.items()}

    def forward(self, images: np.ndarray, states: np.ndarray) -> np.ndarray:
        """Raw outputs ``y`` for a batch; ``images`` is (B, 2, S, S)."""
        return forward(self.params64(), images, states)[0]

    def predict_hk(self, images: np.ndarray, states: np.ndarray) -> np.ndarray:
        y = self.forward(images, states)
        return np.clip(np.expm1(y), 0.0, 2.0 * self.K)


def init_params(K: int, F: int = 8, seed: int = 0) -> dict:
    """Uniform fan-in init: ``U(-sqrt(6/fan_in), sqrt(6/fan_in))``, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(K, F).items():
        if name.endswith("_b"):
            params[name] = np.zeros(shape)
            continue
        fan_in = int(np.prod(shape[1:])) if name == "conv_w" else shape[0]
        bound = math.sqrt(6.0 / fan_in) if name != "out_w" else math.sqrt(1.0 / fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def new_model(K: int, F: int = 8, seed: int = 0) -> Model:
    return Model(K, F, init_params(K, F, seed))


def _im2col(images: np.ndarray) -> np.ndarray:
    # (B, 2, S, S) -> (B, P, 2*3*3), P in row-major (row, col) order
    win = np.lib.stride_tricks.sliding_window_view(images, (KERNEL, KERNEL), axis=(2, 3))
    B, C, R, Q = win.shape[:4]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(B, R * Q, C * KERNEL * KERNEL)


def forward(p: dict, images: np.ndarray, states: np.ndarray):
    images = np.asarray(images, dtype=np.float64)
    states = np.asarray(states, dtype=np.float64)
    B = images.shape[0]
    F = p["conv_b"].shape[0]
    cols = _im2col(images)
    conv = cols @ p["conv_w"].reshape(F, -1).T + p["conv_b"]
    a0 = np.maximum(conv, 0.0)
    z0 = np.concatenate([a0.reshape(B, -1), states], axis=1)
    z1 = z0 @ p["fc1_w"] + p["fc1_b"]
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ p["fc2_w"] + p["fc2_b"]
    a2 = np.maximum(z2, 0.0)
    y = (a2 @ p["out_w"] + p["out_b"])[:, 0]
    return y, (cols, conv, z0, z1, a1, z2, a2)


def loss_and_grads(p: dict, images, states, y_target):
    """Mean squared error against ``y_target`` and its parameter gradients."""
    y, (cols, conv, z0, z1, a1, z2, a2) = forward(p, images, states)
    B = y.shape[0]
    err = y - y_target
    loss = float(np.mean(err * err))
    dy = (2.0 / B) * err[:, None]
    g = {}
    g["out_w"] = a2.T @ dy
    g["out_b"] = dy.sum(axis=0)
    dz2 = (dy @ p["out_w"].T) * (z2 > 0)
    g["fc2_w"] = a1.T @ dz2
    g["fc2_b"] = dz2.sum(axis=0)
    dz1 = (dz2 @ p["fc2_w"].T) * (z1 > 0)
    g["fc1_w"] = z0.T @ dz1
    g["fc1_b"] = dz1.sum(axis=0)
    dz0 = dz1 @ p["fc1_w"].T
    F = p["conv_b"].shape[0]
    nconv = conv.shape[1] * F
    dconv = dz0[:, :nconv].reshape(conv.shape) * (conv > 0)
    g["conv_w"] = np.einsum("bpf,bpk->fk", dconv, cols).reshape(p["conv_w"].shape)
    g["conv_b"] = dconv.sum(axis=(0, 1))
    return loss, g


def log_target(hk: np.ndarray) -> np.ndarray:
    return np.log1p(np.asarray(hk, dtype=np.float64))


class Adam:
    def __init__(self, params: dict, lr: float = 1e-3, b1: float = 0.9, b2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.b1, self.b2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, gk in grads.items():
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1.0 - b1) * gk
            v *= b2
            v += (1.0 - b2) * gk * gk
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(dataset, epochs: int = 100, batch_size: int = 32, learning_rate: float = 1e-3,
          seed: int = 0, F: int = 8, progress=None):
    """Fit a fresh model to ``dataset``; returns ``(model, per-epoch mean loss)``.

    Batch order comes from a seeded permutation per epoch, so the run is
    reproducible for a given seed.
    """
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    images = dataset.images()
    states = dataset.states.astype(np.float64)
    y = log_target(dataset.targets)
    p = init_params(dataset.K, F, seed)
    opt = Adam(p, learning_rate)
    rng = np.random.default_rng(seed + 1)
    history = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            loss, g = loss_and_grads(p, images[idx], states[idx], y[idx])
            if not math.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}, batch starting {lo}")
            opt.step(p, g)
            total += loss * len(idx)
        history.append(total / n)
        if progress is not None:
            progress(epoch, history[-1])
        log.debug("epoch %d loss %.5f", epoch, history[-1])
    return Model(dataset.K, F, p), history


def evaluate_loss(model: Model, dataset, batch: int = 4096) -> float:
    """Mean squared log error of ``model`` on ``dataset``."""
    if len(dataset) == 0:
        return float("nan")
    p = model.params64()
    y = log_target(dataset.targets)
    total = 0.0
    for lo in range(0, len(dataset), batch):
        sl = slice(lo, lo + batch)
        out = forward(p, dataset.images(sl), dataset.states[sl])[0]
        total += float(np.sum((out - y[sl]) ** 2))
    return total / len(dataset)


def gradient_check(model, images, states, target, epsilon: float = 1e-5) -> float:
    """Worst relative gap between backprop and central differences.

    ``target`` is in h_k units (it is log-transformed like in training).
    Relative gap per entry is ``|a - n| / max(|a| + |n|, 1e-10)``.
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError("epsilon must be in [1e-6, 1e-3]")
    p = model.params64() if isinstance(model, Model) else {k: np.array(v, dtype=np.float64) for k, v in model.items()}
    images = np.asarray(images, dtype=np.float64)
    states = np.asarray(states, dtype=np.float64)
    if images.ndim == 3:
        images, states = images[None], states[None]
    yt = np.atleast_1d(log_target(target))
    _, grads = loss_and_grads(p, images, states, yt)

    def loss():
        err = forward(p, images, states)[0] - yt
        return float(np.mean(err * err))

    worst = 0.0
    for name in PARAM_ORDER:
        arr = p[name]
        flat = arr.reshape(-1)
        ga = grads[name].reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + epsilon
            lp = loss()
            flat[i] = old - epsilon
            lm = loss()
            flat[i] = old
            num = (lp - lm) / (2.0 * epsilon)
            gap = abs(ga[i] - num) / max(abs(ga[i]) + abs(num), 1e-10)
            worst = max(worst, gap)
    return worst


def save_model(model: Model, path) -> None:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<B", FORMAT_VERSION))
    buf.write(struct.pack("<II", model.K, model.F))
    for name in PARAM_ORDER:
        arr = np.ascontiguousarray(model.params[name], dtype="<f4").reshape(-1)
        buf.write(struct.pack("<I", arr.size))
        buf.write(arr.tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_model(path) -> Model:
    data = Path(path).read_bytes()
    if len(data) < 13 or data[:4] != MAGIC:
        raise ModelLoadError(f"{path}: bad magic")
    if data[4] != FORMAT_VERSION:
        raise ModelLoadError(f"{path}: unsupported format version {data[4]}")
    K, F = struct.unpack_from("<II", data, 5)
    if K < 1 or F < 1:
        raise ModelLoadError(f"{path}: bad header K={K} F={F}")
    shapes = param_shapes(K, F)
    off = 13
    params = {}
    for name in PARAM_ORDER:
        if off + 4 > len(data):
            raise ModelLoadError(f"{path}: truncated before {name}")
        (n,) = struct.unpack_from("<I", data, off)
        off += 4
        want = int(np.prod(shapes[name]))
        if n != want:
            raise ModelLoadError(f"{path}: {name} has {n} values, expected {want}")
        if off + 4 * n > len(data):
            raise ModelLoadError(f"{path}: truncated in {name}")
        params[name] = np.frombuffer(data, dtype="<f4", count=n, offset=off).reshape(shapes[name]).astype(np.float32)
        off += 4 * n
    if off != len(data):
        raise ModelLoadError(f"{path}: {len(data) - off} trailing bytes")
    try:
        return Model(K, F, params)
    except ValueError as e:
        raise ModelLoadError(f"{path}: {e}") from None
