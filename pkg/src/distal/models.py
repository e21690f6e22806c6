"""Scalar-output models on [0,1]^n behind one uniform interface.

Every model exposes: batched forward evaluation, the sparse gradient of the
scalar output w.r.t. a flat parameter vector, weighted batch-gradient
accumulation into a dense buffer (the training primitive), and read/write
access to the flat parameters. SparseGrad indices always refer to positions
in that flat vector, so gradients and parameter edits line up across runs.
"""

from __future__ import annotations

import abc
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .sparse import SparseGrad
from .splines import batch_windows, check_unit_interval, n_basis

_OFFSETS4 = np.arange(4, dtype=np.int64)


class Model(abc.ABC):
    """Base contract: pure evaluation, explicit parameter access."""

    kind: str = ""
    n: int

    _params: np.ndarray

    @property
    def params(self) -> np.ndarray:
        """Flat trainable parameter vector (writable view)."""
        return self._params

    @property
    def n_params(self) -> int:
        return self._params.size

    def forward(self, x: Sequence[float]) -> float:
        return float(self.forward_batch(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])

    @abc.abstractmethod
    def forward_batch(self, X: np.ndarray) -> np.ndarray:
        """Evaluate at each row of X, shape (B, n) -> (B,)."""

    @abc.abstractmethod
    def param_grad(self, x: Sequence[float]) -> SparseGrad:
        """Gradient of the scalar output at one point."""

    @abc.abstractmethod
    def add_batch_grad(self, X: np.ndarray, coeffs: np.ndarray, out: np.ndarray) -> None:
        """Accumulate sum_b coeffs[b] * grad f(x_b) into ``out``.

        Parameters never touched by any x_b receive no write at all, so their
        buffer entries keep exact zeros.
        """

    @abc.abstractmethod
    def arch(self) -> dict:
        """JSON-serializable architecture descriptor."""

    def clone(self) -> "Model":
        m = model_from_arch(self.arch())
        m.params[:] = self._params
        return m

    def _check_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n:
            raise ValueError(f"dimension mismatch: expected inputs of shape (*, {self.n})")
        check_unit_interval(X)
        return X


class LookupTableModel(Model):
    """Piecewise-constant model: z^n equal cells, one trainable value each."""

    kind = "lookup"

    def __init__(self, n: int, z: int, table: np.ndarray | None = None):
        if n < 1 or z < 1:
            raise ValueError("invalid sizes: need n >= 1 and z >= 1")
        self.n = n
        self.z = z
        size = z**n
        if table is None:
            self._params = np.zeros(size)
        else:
            self._params = np.array(table, dtype=np.float64).reshape(-1).copy()
            if self._params.size != size:
                raise ValueError(f"invalid sizes: table must have z^n = {size} entries")

    @property
    def table(self) -> np.ndarray:
        return self._params

    def cell_index(self, X: np.ndarray) -> np.ndarray:
        """Row-major flat cell per row; x = 1 stays in the last cell."""
        cells = np.minimum(np.floor(X * self.z).astype(np.int64), self.z - 1)
        flat = np.zeros(X.shape[0], dtype=np.int64)
        for j in range(self.n):
            flat = flat * self.z + cells[:, j]
        return flat

    def forward_batch(self, X: np.ndarray) -> np.ndarray:
        X = self._check_batch(X)
        return self._params[self.cell_index(X)]

    def param_grad(self, x: Sequence[float]) -> SparseGrad:
        X = self._check_batch(np.asarray(x, dtype=np.float64).reshape(1, -1))
        cell = self.cell_index(X)
        return SparseGrad(cell, np.ones(1), self.n_params)

    def add_batch_grad(self, X: np.ndarray, coeffs: np.ndarray, out: np.ndarray) -> None:
        X = self._check_batch(X)
        np.add.at(out, self.cell_index(X), np.asarray(coeffs, dtype=np.float64))

    def arch(self) -> dict:
        return {"kind": self.kind, "n": self.n, "z": self.z}


class SplineAnnModel(Model):
    """Additive model: an independent z-density cubic B-spline per input variable."""

    kind = "spline_ann"

    def __init__(self, n: int, z: int, coeffs: np.ndarray | None = None):
        if n < 1 or z < 1:
            raise ValueError("invalid sizes: need n >= 1 and z >= 1")
        self.n = n
        self.z = z
        size = n * n_basis(z)
        if coeffs is None:
            self._params = np.zeros(size)
        else:
            self._params = np.array(coeffs, dtype=np.float64).reshape(-1).copy()
            if self._params.size != size:
                raise ValueError(f"invalid sizes: need n*(4z+3) = {size} coefficients")

    @property
    def coeffs(self) -> np.ndarray:
        """Per-dimension coefficients, shape (n, 4z+3); a view into params."""
        return self._params.reshape(self.n, n_basis(self.z))

    def forward_batch(self, X: np.ndarray) -> np.ndarray:
        X = self._check_batch(X)
        C = self.coeffs
        out = np.zeros(X.shape[0])
        for j in range(self.n):
            first0, v = batch_windows(self.z, X[:, j])
            g = C[j, first0[:, None] + _OFFSETS4]
            out = out + (
                ((g[:, 0] * v[:, 0] + g[:, 1] * v[:, 1]) + g[:, 2] * v[:, 2]) + g[:, 3] * v[:, 3]
            )
        return out

    def param_grad(self, x: Sequence[float]) -> SparseGrad:
        X = self._check_batch(np.asarray(x, dtype=np.float64).reshape(1, -1))
        m = n_basis(self.z)
        idx_parts = []
        val_parts = []
        for j in range(self.n):
            first0, v = batch_windows(self.z, X[:, j])
            vj = v[0]
            keep = vj != 0.0
            idx_parts.append(j * m + int(first0[0]) + np.flatnonzero(keep))
            val_parts.append(vj[keep])
        return SparseGrad(np.concatenate(idx_parts), np.concatenate(val_parts), self.n_params)

    def add_batch_grad(self, X: np.ndarray, coeffs: np.ndarray, out: np.ndarray) -> None:
        X = self._check_batch(X)
        c = np.asarray(coeffs, dtype=np.float64)
        out2 = out.reshape(self.n, n_basis(self.z))
        for j in range(self.n):
            first0, v = batch_windows(self.z, X[:, j])
            np.add.at(out2, (j, first0[:, None] + _OFFSETS4), c[:, None] * v)

    def arch(self) -> dict:
        return {"kind": self.kind, "n": self.n, "z": self.z}


class AbelSplineModel(Model):
    """Additive spline plus paired exponentials of additive splines.

    Block layout of the flat parameters: the direct additive part first, then
    the big_k exponent blocks for the positive exponentials, then the big_k
    blocks for the negative ones; each block is n*(4z+3) wide. Pair k is
    scaled by 1/k^2.
    """

    kind = "abel"

    def __init__(self, n: int, z: int, big_k: int, params: np.ndarray | None = None):
        if n < 1 or z < 1 or big_k < 1:
            raise ValueError("invalid sizes: need n, z, big_k >= 1")
        self.n = n
        self.z = z
        self.big_k = big_k
        size = (2 * big_k + 1) * n * n_basis(z)
        if params is None:
            self._params = np.zeros(size)
        else:
            self._params = np.array(params, dtype=np.float64).reshape(-1).copy()
            if self._params.size != size:
                raise ValueError(f"invalid sizes: need n*(4z+3)*(2*big_k+1) = {size} parameters")

    @property
    def n_blocks(self) -> int:
        return 2 * self.big_k + 1

    @property
    def block_coeffs(self) -> np.ndarray:
        """Shape (2*big_k+1, n, 4z+3); block 0 is the direct part."""
        return self._params.reshape(self.n_blocks, self.n, n_basis(self.z))

    def _block_sums(self, X: np.ndarray) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
        """Per-block additive spline values, plus the per-dimension windows."""
        C = self.block_coeffs
        sums = np.zeros((self.n_blocks, X.shape[0]))
        windows = []
        for j in range(self.n):
            first0, v = batch_windows(self.z, X[:, j])
            g = C[:, j, :][:, first0[:, None] + _OFFSETS4]
            sums += (
                ((g[..., 0] * v[:, 0] + g[..., 1] * v[:, 1]) + g[..., 2] * v[:, 2])
                + g[..., 3] * v[:, 3]
            )
            windows.append((first0, v))
        return sums, windows

    def forward_batch(self, X: np.ndarray) -> np.ndarray:
        X = self._check_batch(X)
        sums, _ = self._block_sums(X)
        out = sums[0].copy()
        for k in range(1, self.big_k + 1):
            out = out + (np.exp(sums[k]) - np.exp(sums[self.big_k + k])) / float(k * k)
        return out

    def _block_weights(self, sums: np.ndarray) -> np.ndarray:
        """d output / d (block value) for every block, shape (blocks, B)."""
        w = np.empty_like(sums)
        w[0] = 1.0
        for k in range(1, self.big_k + 1):
            scale = 1.0 / float(k * k)
            w[k] = scale * np.exp(sums[k])
            w[self.big_k + k] = -scale * np.exp(sums[self.big_k + k])
        return w

    def param_grad(self, x: Sequence[float]) -> SparseGrad:
        X = self._check_batch(np.asarray(x, dtype=np.float64).reshape(1, -1))
        sums, windows = self._block_sums(X)
        w = self._block_weights(sums)[:, 0]
        m = n_basis(self.z)
        block_stride = self.n * m
        idx_parts = []
        val_parts = []
        for b in range(self.n_blocks):
            for j in range(self.n):
                first0, v = windows[j]
                vj = v[0]
                keep = vj != 0.0
                idx_parts.append(b * block_stride + j * m + int(first0[0]) + np.flatnonzero(keep))
                val_parts.append(w[b] * vj[keep])
        return SparseGrad(np.concatenate(idx_parts), np.concatenate(val_parts), self.n_params)

    def add_batch_grad(self, X: np.ndarray, coeffs: np.ndarray, out: np.ndarray) -> None:
        X = self._check_batch(X)
        c = np.asarray(coeffs, dtype=np.float64)
        sums, windows = self._block_sums(X)
        w = self._block_weights(sums) * c
        out3 = out.reshape(self.n_blocks, self.n, n_basis(self.z))
        blocks = np.arange(self.n_blocks)[:, None, None]
        for j in range(self.n):
            first0, v = windows[j]
            idx = (first0[:, None] + _OFFSETS4)[None, :, :]
            np.add.at(out3, (blocks, j, idx), w[:, :, None] * v[None, :, :])

    def arch(self) -> dict:
        return {"kind": self.kind, "n": self.n, "z": self.z, "big_k": self.big_k}


class ReluMlpModel(Model):
    """Fully connected ReLU network with a linear scalar output.

    Inputs pass through a fixed (non-trainable) affine map [0,1] -> [-1,1]
    first. The flat parameter order is W_0 (row-major), b_0, W_1, b_1, ...
    The ReLU subgradient at a pre-activation of exactly 0 is taken as 0.
    """

    kind = "relu_mlp"

    def __init__(self, layer_sizes: Sequence[int], params: np.ndarray | None = None):
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes) or sizes[-1] != 1:
            raise ValueError("invalid sizes: need [n, hidden..., 1] with positive widths")
        self.layer_sizes = sizes
        self.n = sizes[0]
        total = sum(fi * fo + fo for fi, fo in zip(sizes[:-1], sizes[1:]))
        if params is None:
            self._params = np.zeros(total)
        else:
            self._params = np.array(params, dtype=np.float64).reshape(-1).copy()
            if self._params.size != total:
                raise ValueError(f"invalid sizes: need {total} parameters")

    def layer_views(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(W, b) views into the flat parameter vector, one pair per layer."""
        views = []
        o = 0
        for fi, fo in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            W = self._params[o : o + fi * fo].reshape(fi, fo)
            o += fi * fo
            b = self._params[o : o + fo]
            o += fo
            views.append((W, b))
        return views

    def _forward_saved(self, X: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        hs = [2.0 * X - 1.0]
        pre = []
        views = self.layer_views()
        for layer, (W, b) in enumerate(views):
            a = hs[-1] @ W + b
            pre.append(a)
            hs.append(np.maximum(a, 0.0) if layer < len(views) - 1 else a)
        return hs, pre

    # Evaluation-only batches stream through in chunks: wide layers times a
    # 1e5-point sample would otherwise materialise gigabyte activations.
    _EVAL_CHUNK = 8192

    def forward_batch(self, X: np.ndarray) -> np.ndarray:
        X = self._check_batch(X)
        views = self.layer_views()
        out = np.empty(X.shape[0])
        for start in range(0, X.shape[0], self._EVAL_CHUNK):
            h = 2.0 * X[start : start + self._EVAL_CHUNK] - 1.0
            for layer, (W, b) in enumerate(views):
                a = h @ W
                a += b
                if layer < len(views) - 1:
                    np.maximum(a, 0.0, out=a)
                h = a
            out[start : start + self._EVAL_CHUNK] = h[:, 0]
        return out

    def add_batch_grad(self, X: np.ndarray, coeffs: np.ndarray, out: np.ndarray) -> None:
        X = self._check_batch(X)
        c = np.asarray(coeffs, dtype=np.float64)
        hs, pre = self._forward_saved(X)
        views = self.layer_views()
        offsets = []
        o = 0
        for fi, fo in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            offsets.append(o)
            o += fi * fo + fo
        delta = c[:, None]
        for layer in range(len(views) - 1, -1, -1):
            W, _ = views[layer]
            fi, fo = W.shape
            o = offsets[layer]
            out[o : o + fi * fo] += (hs[layer].T @ delta).reshape(-1)
            out[o + fi * fo : o + fi * fo + fo] += delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ W.T) * (pre[layer - 1] > 0.0)

    def param_grad(self, x: Sequence[float]) -> SparseGrad:
        buf = np.zeros(self.n_params)
        self.add_batch_grad(np.asarray(x, dtype=np.float64).reshape(1, -1), np.ones(1), buf)
        return SparseGrad.from_dense(buf)

    def arch(self) -> dict:
        return {"kind": self.kind, "layer_sizes": list(self.layer_sizes)}


@dataclass(frozen=True)
class InitSpec:
    """Deterministic parameter initialization: identical spec -> identical bits."""

    kind: str  # "glorot_uniform" | "random_uniform"
    seed: int
    range: tuple[float, float] = (-0.05, 0.05)


def model_from_arch(arch: dict) -> Model:
    kind = arch.get("kind")
    if kind == "lookup":
        return LookupTableModel(arch["n"], arch["z"])
    if kind == "spline_ann":
        return SplineAnnModel(arch["n"], arch["z"])
    if kind == "abel":
        return AbelSplineModel(arch["n"], arch["z"], arch["big_k"])
    if kind == "relu_mlp":
        return ReluMlpModel(arch["layer_sizes"])
    raise ValueError(f"unknown model kind: {kind!r}")


def init_model(spec: InitSpec, arch: dict) -> Model:
    """Build a model and draw its parameters from the spec's seeded stream."""
    m = model_from_arch(arch)
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "random_uniform":
        lo, hi = spec.range
        if not hi > lo:
            raise ValueError("invalid sizes: range must be increasing")
        m.params[:] = rng.uniform(lo, hi, size=m.n_params)
    elif spec.kind == "glorot_uniform":
        if not isinstance(m, ReluMlpModel):
            raise ValueError("glorot_uniform needs a layered architecture")
        for W, b in m.layer_views():
            fan_in, fan_out = W.shape
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            W[:] = rng.uniform(-limit, limit, size=W.shape)
            b[:] = 0.0
    else:
        raise ValueError(f"unknown init kind: {spec.kind!r}")
    return m


MODEL_DUMP_FORMAT = "flat-params-v1"


def save_model(m: Model, path: str | Path) -> None:
    """Text dump (architecture + hex-float parameters); round-trips bit-exactly."""
    payload = {
        "format": MODEL_DUMP_FORMAT,
        "arch": m.arch(),
        "params": [float(v).hex() for v in m.params],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True))


def load_model(path: str | Path) -> Model:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != MODEL_DUMP_FORMAT:
        raise ValueError(f"unknown model dump format: {payload.get('format')!r}")
    m = model_from_arch(payload["arch"])
    m.params[:] = [float.fromhex(h) for h in payload["params"]]
    return m
