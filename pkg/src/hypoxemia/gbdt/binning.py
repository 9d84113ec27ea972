"""Quantile histogram binning for the boosted-tree learner.

Each feature gets at most ``max_bins`` finite bins whose upper edges come
from quantiles of the training values (or the unique values themselves when
there are few).  Bin code k holds values in (upper[k-1], upper[k]]; the last
finite bin is unbounded above.  NaN maps to a dedicated missing bin whose
routing is chosen per split by gain.
"""

from __future__ import annotations

import numpy as np


class Binning:
    """Per-feature bin upper edges fitted on training data."""

    def __init__(self, uppers: list[np.ndarray]):
        self.uppers = uppers

    @classmethod
    def fit(cls, X: np.ndarray, max_bins: int) -> "Binning":
        uppers = []
        for f in range(X.shape[1]):
            col = X[:, f]
            vals = col[np.isfinite(col)]
            if vals.size == 0:
                uppers.append(np.empty(0))
                continue
            uniq = np.unique(vals)
            if uniq.size <= max_bins:
                edges = uniq[:-1]  # one bin per distinct value
            else:
                qs = np.quantile(uniq, np.linspace(0.0, 1.0, max_bins + 1)[1:-1])
                edges = np.unique(qs)
            uppers.append(np.asarray(edges, dtype=float))
        return cls(uppers)

    def n_finite_bins(self, feature: int) -> int:
        return len(self.uppers[feature]) + 1

    def missing_code(self, feature: int) -> int:
        return len(self.uppers[feature]) + 1

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Map raw values to bin codes; NaN goes to the missing bin."""
        codes = np.empty(X.shape, dtype=np.int32)
        for f, edges in enumerate(self.uppers):
            col = X[:, f]
            codes[:, f] = np.searchsorted(edges, col, side="left")
            codes[np.isnan(col), f] = len(edges) + 1
        return codes

    def as_lists(self) -> list[list[float]]:
        return [edges.tolist() for edges in self.uppers]

    @classmethod
    def from_lists(cls, data: list[list[float]]) -> "Binning":
        return cls([np.asarray(edges, dtype=float) for edges in data])
