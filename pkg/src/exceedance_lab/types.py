"""Shared domain types used across modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TAIL = "tail"
SPECTRAL = "spectral"


@dataclass
class TailPath:
    """Two-sided window of a tail (or spectral tail) process sample.

    Attributes
    ----------
    lags : (L,) int array, -m .. m.
    vectors : (L, S) array, the spatial vector at each lag.
    normalization : "tail" (norm at lag 0 exceeds 1) or "spectral"
        (norm at lag 0 equals 1 exactly).
    """

    lags: np.ndarray
    vectors: np.ndarray
    normalization: str

    def __post_init__(self):
        self.lags = np.asarray(self.lags, dtype=np.int64)
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != self.lags.shape[0]:
            raise ValueError("vectors must be (len(lags), n_sites)")
        if self.normalization not in (TAIL, SPECTRAL):
            raise ValueError(f"unknown normalization {self.normalization!r}")

    @property
    def window(self) -> int:
        return int(self.lags.max())

    def norms(self) -> np.ndarray:
        """Sup-norm of the vector at each lag."""
        return self.vectors.max(axis=1)

    def value_at(self, lag: int) -> np.ndarray:
        idx = np.nonzero(self.lags == lag)[0]
        if idx.size == 0:
            raise KeyError(f"lag {lag} outside window")
        return self.vectors[idx[0]]

    def to_spectral(self) -> "TailPath":
        """Divide by the lag-0 norm; identity if already spectral."""
        if self.normalization == SPECTRAL:
            return self
        y0 = float(self.value_at(0).max())
        return TailPath(self.lags.copy(), self.vectors / y0, SPECTRAL)
