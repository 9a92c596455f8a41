"""Translation-invariant local inputs for the local-heuristic regressor.

A state ``s`` with cell ``(cx, cy) = (floor(x), floor(y))`` maps to

* ``obstacles``: (2K+1, 2K+1) array, 1 for blocked or off-map cells;
  row ``i``/column ``j`` is the cell at offset ``(j-K, i-K)``
* ``dh``: same layout, ``h_g(cell center) - h_g(s)``
* ``state``: ``(x - cx, y - cy, theta/12, (v+1)/5)``; zeros on the grid
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class LocalInput:
    obstacles: np.ndarray
    dh: np.ndarray
    state: np.ndarray

    @property
    def K(self) -> int:
        return (self.obstacles.shape[0] - 1) // 2

    def image(self) -> np.ndarray:
        """(2, 2K+1, 2K+1) float image: obstacles then dh."""
        return np.stack([self.obstacles.astype(np.float64), self.dh])

    def __eq__(self, other):
        if not isinstance(other, LocalInput):
            return NotImplemented
        return (np.array_equal(self.obstacles, other.obstacles) and np.array_equal(self.dh, other.dh)
                and np.array_equal(self.state, other.state))


class FeatureExtractor:
    """Reusable extractor bound to one domain (map + goal)."""

    def __init__(self, domain, K: int):
        self.domain = domain
        self.K = K
        self._pad = K
        self._occ = domain.grid.padded(K).astype(np.uint8)
        offs = np.arange(-K, K + 1)
        self._ox, self._oy = np.meshgrid(offs, offs)  # [i, j] -> (dx=j-K, dy=i-K)

    def __call__(self, s) -> LocalInput:
        obs, dh, st = self.arrays(s)
        return LocalInput(obs, dh, st)

    def arrays(self, s):
        K = self.K
        d = self.domain
        cx, cy = d.cell(s)
        # padded index of cell (cx-K, cy-K) is (cx, cy)
        obs = self._occ[cy:cy + 2 * K + 1, cx:cx + 2 * K + 1].copy()
        dh = d.h_cells(cx + self._ox, cy + self._oy) - d.h(s)
        st = np.asarray(d.invariant_state(s), dtype=np.float64)
        return obs, dh, st


def extract_features(domain, s, K: int) -> LocalInput:
    return FeatureExtractor(domain, K)(s)
