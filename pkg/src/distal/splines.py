"""Cardinal cubic B-spline activation, basis windows, and one-variable splines.

A spline of density ``z`` places ``4z + 3`` basis functions on [0, 1]; basis
``i`` (1-based, matching the usual control-point numbering) evaluates the
shared bump ``S`` at ``4z*x + 4 - i``.  At any x at most four consecutive
basis functions are non-zero, so evaluation and gradients touch a window of
four coefficients.  Internally indices are 0-based: basis ``i`` lives at
``theta[i - 1]``; this is the only place the conversion happens.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sparse import SparseGrad

SUPPORT = 4.0  # the activation bump is non-zero on the open interval (0, 4)


def n_basis(z: int) -> int:
    return 4 * z + 3


def activation_values(args: np.ndarray) -> np.ndarray:
    """Vectorized piecewise-cubic bump; exactly 0.0 outside [0, 4]."""
    a = np.asarray(args, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite input")
    out = np.zeros_like(a)
    m = (a >= 0.0) & (a < 1.0)
    t = a[m]
    out[m] = t * t * t / 6.0
    m = (a >= 1.0) & (a < 2.0)
    t = a[m] - 1.0
    out[m] = (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0
    m = (a >= 2.0) & (a < 3.0)
    t = a[m] - 2.0
    out[m] = (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0
    m = (a >= 3.0) & (a < 4.0)
    t = 4.0 - a[m]
    out[m] = t * t * t / 6.0
    return out


def activation_s(x: float) -> float:
    """The scalar activation S(x): C-squared, supported on [0, 4], peak 2/3 at x=2."""
    return float(activation_values(np.array([float(x)]))[0])


def check_unit_interval(x: np.ndarray, what: str = "x") -> None:
    if not np.all((x >= 0.0) & (x <= 1.0)):
        raise ValueError(f"domain violation: {what} must lie in [0, 1]")


def batch_windows(z: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """0-based window starts and the 4 basis values per point.

    ``first0[b] + j`` (j = 0..3) indexes theta; the matching basis value is
    ``vals[b, j]``.  The window start is clamped so the window never leaves
    ``0..4z+2``; at x = 1 the clamp shifts the window down one slot and the
    displaced leading value is exactly 0 (the bump vanishes at argument 4).
    """
    if z < 1:
        raise ValueError("z must be a positive integer")
    x = np.asarray(x, dtype=np.float64)
    check_unit_interval(x)
    u = (4.0 * z) * x
    first1 = np.minimum(np.floor(u).astype(np.int64) + 1, 4 * z)  # 1-based start
    args = (u + 4.0)[:, None] - (first1[:, None] + np.arange(4, dtype=np.int64)[None, :])
    vals = activation_values(args)
    return first1 - 1, vals


@dataclass
class BasisWindow:
    """The up-to-four non-zero basis values at one point.

    ``first_index`` is 1-based; entry j is basis ``first_index + j``.
    """

    first_index: int
    values: np.ndarray


def basis_window(z: int, x: float) -> BasisWindow:
    first0, vals = batch_windows(z, np.array([float(x)]))
    return BasisWindow(first_index=int(first0[0]) + 1, values=vals[0])


def dense_basis(z: int, x: float) -> np.ndarray:
    """All 4z+3 basis values at x, computed directly from the definition.

    Brute-force companion to ``batch_windows``; used as an oracle for
    partition-of-unity and window-placement checks.
    """
    if z < 1:
        raise ValueError("z must be a positive integer")
    xv = np.asarray([float(x)])
    check_unit_interval(xv)
    i = np.arange(1, n_basis(z) + 1, dtype=np.float64)
    return activation_values((4.0 * z) * float(x) + 4.0 - i)


@dataclass
class ZDensitySpline:
    """One-variable cardinal cubic B-spline with 4z+3 coefficients."""

    z: int
    theta: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.z < 1:
            raise ValueError("z must be a positive integer")
        if self.theta is None:
            self.theta = np.zeros(n_basis(self.z))
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.shape != (n_basis(self.z),):
            raise ValueError(f"theta must have length 4z+3 = {n_basis(self.z)}")


def spline_forward(s: ZDensitySpline, x: float) -> float:
    """Evaluate the spline from its 4-wide window.

    Accumulation is explicit left-to-right so the result is bit-identical to a
    sequential dense sum over all 4z+3 terms (the skipped terms are exact
    zeros).
    """
    first0, vals = batch_windows(s.z, np.array([float(x)]))
    f = int(first0[0])
    th = s.theta
    v = vals[0]
    return float(((th[f] * v[0] + th[f + 1] * v[1]) + th[f + 2] * v[2]) + th[f + 3] * v[3])


def spline_param_grad(s: ZDensitySpline, x: float) -> SparseGrad:
    """d f / d theta_i = S_i(x); zero-valued window slots are dropped."""
    first0, vals = batch_windows(s.z, np.array([float(x)]))
    v = vals[0]
    keep = v != 0.0
    idx = (int(first0[0]) + np.arange(4, dtype=np.int64))[keep]
    return SparseGrad(idx, v[keep], dim=s.theta.size)
