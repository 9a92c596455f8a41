from __future__ import annotations

import numpy as np

from .features import FeatureExtractor
from .network import Model, forward


class LearnedLocalHeuristic:
    """``h_g + predicted h_k`` for one domain; one forward pass per new state.

    A predicted dead end is just the value 2K, never infinity.
    """

    def __init__(self, domain, model: Model):
        self.domain = domain
        self.model = model
        self.K = model.K
        self._fx = FeatureExtractor(domain, model.K)
        self._p = model.params64()
        self.evaluations = 0

    def local(self, s) -> float:
        obs, dh, st = self._fx.arrays(s)
        img = np.stack([obs.astype(np.float64), dh])[None]
        y = forward(self._p, img, st[None])[0][0]
        self.evaluations += 1
        return float(min(max(np.expm1(y), 0.0), 2.0 * self.K))

    def __call__(self, s) -> float:
        return self.domain.h(s) + self.local(s)


def predict_hk(model: Model, inp) -> float:
    """Clamped ``exp(y) - 1`` for one :class:`LocalInput`."""
    if inp.K != model.K:
        raise ValueError(f"input K={inp.K} does not match model K={model.K}")
    return float(model.predict_hk(inp.image()[None], inp.state[None])[0])
