"""Sparse parameter-gradient vectors stored as (index, value) pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SparseGrad:
    """Gradient of a scalar model output w.r.t. a flat parameter vector.

    Indices are 0-based positions into the flat parameter vector, strictly
    increasing and all below ``dim``. Dot products between gradients with
    disjoint index sets are exactly 0.0 by construction (no floating-point
    cancellation involved).
    """

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self) -> None:
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.indices.shape != self.values.shape or self.indices.ndim != 1:
            raise ValueError("dimension mismatch: indices and values must be 1-D and equal length")
        if self.indices.size:
            if not np.all(np.diff(self.indices) > 0):
                raise ValueError("indices must be strictly increasing")
            if self.indices[0] < 0 or self.indices[-1] >= self.dim:
                raise ValueError(f"index out of range for dim={self.dim}")

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SparseGrad":
        """Wrap a dense gradient, keeping every entry (including zeros)."""
        dense = np.asarray(dense, dtype=np.float64)
        return cls(np.arange(dense.size, dtype=np.int64), dense.copy(), dense.size)

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.values))

    def l1(self) -> float:
        return float(np.sum(np.abs(self.values)))

    def dot(self, other: "SparseGrad") -> float:
        """Sparse dot product; exactly 0.0 when index sets are disjoint."""
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        common, ia, ib = np.intersect1d(
            self.indices, other.indices, assume_unique=True, return_indices=True
        )
        if common.size == 0:
            return 0.0
        acc = 0.0
        for va, vb in zip(self.values[ia], other.values[ib]):
            acc += va * vb
        return acc

    def support_disjoint(self, other: "SparseGrad") -> bool:
        """True when no index with a non-zero value is shared."""
        a = self.indices[self.values != 0.0]
        b = other.indices[other.values != 0.0]
        return np.intersect1d(a, b, assume_unique=True).size == 0

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def add_into(self, out: np.ndarray, scale: float = 1.0) -> None:
        """Accumulate ``scale * self`` into a dense buffer."""
        if out.shape != (self.dim,):
            raise ValueError("dimension mismatch")
        np.add.at(out, self.indices, scale * self.values)
