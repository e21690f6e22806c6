"""Independent brute-force oracles used to freeze expected test values.

Everything here avoids the library's windowed fast paths: basis values come
straight from the defining formula, sums run sequentially in index order, and
gradients come from central finite differences of the forward pass only.
"""

import numpy as np

from distal.splines import activation_s, n_basis


def dense_basis_values(z: int, x: float) -> list[float]:
    """Every basis value at x from the raw definition, one activation at a time."""
    return [activation_s(4.0 * z * x + 4.0 - i) for i in range(1, n_basis(z) + 1)]


def sequential_dense_spline(theta: np.ndarray, z: int, x: float) -> float:
    """Left-to-right sum over all 4z+3 terms (the bit-identity reference)."""
    acc = 0.0
    for t, b in zip(theta, dense_basis_values(z, x)):
        acc += t * b
    return acc


def fd_gradient(model, x, h: float = 1e-6) -> np.ndarray:
    """Central finite differences through model.forward only."""
    base = model.params.copy()
    grad = np.empty(model.n_params)
    for i in range(model.n_params):
        model.params[i] = base[i] + h
        fp = model.forward(x)
        model.params[i] = base[i] - h
        fm = model.forward(x)
        model.params[i] = base[i]
        grad[i] = (fp - fm) / (2.0 * h)
    return grad


def lookup_l1_distance(table_a: np.ndarray, table_b: np.ndarray, z: int, n: int) -> float:
    """Closed-form L1 distance between two piecewise-constant models."""
    cell_volume = 1.0 / z**n
    return float(np.abs(np.asarray(table_b) - np.asarray(table_a)).sum() * cell_volume)


def mean_abs_target_2d(grid: int = 1500) -> float:
    """Quadrature of |sin(4 pi x1) sin(4 pi x2)| over the unit square."""
    g = (np.arange(grid) + 0.5) / grid
    xx, yy = np.meshgrid(g, g)
    return float(np.abs(np.sin(4 * np.pi * xx) * np.sin(4 * np.pi * yy)).mean())


def lookup_best_mae_2d(z: int, grid: int = 1500) -> float:
    """MAE of the per-cell-mean piecewise-constant approximation of the target."""
    g = (np.arange(grid) + 0.5) / grid
    xx, yy = np.meshgrid(g, g)
    f = np.sin(4 * np.pi * xx) * np.sin(4 * np.pi * yy)
    cx = np.clip((xx * z).astype(int), 0, z - 1)
    cy = np.clip((yy * z).astype(int), 0, z - 1)
    idx = (cx * z + cy).ravel()
    means = np.bincount(idx, f.ravel()) / np.bincount(idx)
    return float(np.abs(f.ravel() - means[idx]).mean())
