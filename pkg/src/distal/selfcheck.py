"""Runtime property suites: sparsity, bounds, trainability, orthogonality.

These checks re-derive every quantity from dense brute-force basis
evaluations rather than the windowed production path, so they double as an
independent oracle. The CLI ``selftest`` subcommand runs everything here and
fails on any violation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .interference import DistalSpec, McConfig, run_interference_trials
from .models import (
    AbelSplineModel,
    InitSpec,
    LookupTableModel,
    Model,
    ReluMlpModel,
    SplineAnnModel,
    init_model,
)
from .splines import ZDensitySpline, activation_s, activation_values, n_basis, spline_forward
from .training import TrainConfig, adam_step, fresh_adam_state, train_epochs

Z_VALUES = (1, 5, 20)
N_VALUES = (1, 2, 3)
K_VALUES = (1, 6)
N_TRAIN_POINTS = 10_000


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        suffix = f" ({self.detail})" if self.detail else ""
        return f"[{status}] {self.name}{suffix}"


def dense_basis_matrix(z: int, x: np.ndarray) -> np.ndarray:
    """All 4z+3 basis values per point, straight from the definition."""
    i = np.arange(1, n_basis(z) + 1, dtype=np.float64)
    return activation_values((4.0 * z) * np.asarray(x, dtype=np.float64)[:, None] + 4.0 - i[None, :])


def _probe_x(rng: np.random.Generator, count: int, z: int) -> np.ndarray:
    """Random points plus the awkward ones: endpoints and knot multiples."""
    knots = np.arange(4 * z + 1) / (4.0 * z)
    x = np.concatenate([rng.uniform(size=count), [0.0, 1.0], knots])
    return np.clip(x, 0.0, 1.0)


def _corner_and_edge_points(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    corners = np.array(np.meshgrid(*([[0.0, 1.0]] * n))).T.reshape(-1, n)
    edges = rng.uniform(size=(32, n))
    for r in range(32):
        edges[r, rng.integers(n)] = float(rng.integers(2))  # pin one coordinate to a face
    return np.concatenate([rng.uniform(size=(count, n)), corners, edges])


def check_activation() -> list[CheckResult]:
    cases = [
        (0.0, 0.0),
        (1.0, 1.0 / 6.0),
        (2.0, 2.0 / 3.0),
        (3.0, 1.0 / 6.0),
        (4.0, 0.0),
        (5.0, 0.0),
        (-1.0, 0.0),
    ]
    ok = all(activation_s(x) == want for x, want in cases)
    results = [CheckResult("activation: knot values", ok)]

    # One-sided cubic fits agree at every knot for value, slope, and curvature.
    h = 0.01
    worst = 0.0
    for knot in (0.0, 1.0, 2.0, 3.0, 4.0):
        offs = np.arange(1, 5) * h
        left = activation_values(knot - offs[::-1])
        right = activation_values(knot + offs)
        cl = np.polyfit(-offs[::-1], left, 3)
        cr = np.polyfit(offs, right, 3)
        # poly coefficients at the knot: value, first, second derivative
        dl = (cl[3], cl[2], 2.0 * cl[1])
        dr = (cr[3], cr[2], 2.0 * cr[1])
        worst = max(worst, max(abs(a - b) for a, b in zip(dl, dr)))
    results.append(
        CheckResult("activation: C2 at knots", worst <= 1e-6, f"max one-sided gap {worst:.2e}")
    )
    return results


def check_basis(z_values: Sequence[int] = Z_VALUES) -> list[CheckResult]:
    rng = np.random.default_rng(20240321)
    results = []
    for z in z_values:
        x = _probe_x(rng, 400, z)
        B = dense_basis_matrix(z, x)
        sums = B.sum(axis=1)
        nnz = np.count_nonzero(B, axis=1)
        ok_pou = bool(np.all(np.abs(sums - 1.0) <= 1e-12))
        ok_nnz = bool(np.all((nnz >= 3) & (nnz <= 4)))
        ok_range = bool(np.all((B >= 0.0) & (B <= 2.0 / 3.0)))
        results.append(
            CheckResult(
                f"basis z={z}: partition of unity, 3..4 non-zeros, values in [0, 2/3]",
                ok_pou and ok_nnz and ok_range,
                f"max |sum-1| {np.abs(sums - 1.0).max():.2e}",
            )
        )

        theta = rng.standard_normal(n_basis(z))
        spline = ZDensitySpline(z, theta)
        ok_bits = True
        for xv in x[:64]:
            acc = 0.0
            for ti, bi in zip(theta, dense_basis_matrix(z, np.array([xv]))[0]):
                acc += ti * bi
            if spline_forward(spline, float(xv)) != acc:
                ok_bits = False
                break
        results.append(CheckResult(f"basis z={z}: windowed forward == dense sum (bitwise)", ok_bits))
    return results


def _spline_ann_oracle_rows(z: int, X: np.ndarray) -> list[np.ndarray]:
    return [dense_basis_matrix(z, X[:, j]) for j in range(X.shape[1])]


def check_model_propositions(
    z_values: Sequence[int] = Z_VALUES,
    n_values: Sequence[int] = N_VALUES,
    k_values: Sequence[int] = K_VALUES,
    n_points: int = N_TRAIN_POINTS,
) -> list[CheckResult]:
    """Sparsity, gradient L1 bounds, and uniform trainability for all
    partition-based models, plus the lookup table's one-hot gradient."""
    rng = np.random.default_rng(715)
    results = []
    for z in z_values:
        for n in n_values:
            X = _corner_and_edge_points(rng, n, n_points)
            rows = _spline_ann_oracle_rows(z, X)
            nnz_per_dim = np.stack([np.count_nonzero(B, axis=1) for B in rows])
            l1_per_dim = np.stack([B.sum(axis=1) for B in rows])
            nnz = nnz_per_dim.sum(axis=0)
            l1 = l1_per_dim.sum(axis=0)

            ok = (
                bool(np.all(nnz <= 4 * n))
                and bool(np.all(nnz >= 3 * n))
                and bool(np.all(l1 < 4 * n))
                and bool(np.all(l1 > 0.0))
            )
            results.append(
                CheckResult(
                    f"spline_ann z={z} n={n}: nnz<=4n, grad l1<4n, trainable everywhere",
                    ok,
                    f"{X.shape[0]} points",
                )
            )

            spline = SplineAnnModel(n, z)
            spline.params[:] = rng.uniform(-1.0, 1.0, spline.n_params)
            ok_model = True
            for xr in X[:: max(1, X.shape[0] // 25)]:
                g = spline.param_grad(xr)
                if g.nnz > 4 * n or g.nnz < 3 * n or not g.l1() < 4 * n:
                    ok_model = False
            results.append(
                CheckResult(f"spline_ann z={z} n={n}: model gradients match the bounds", ok_model)
            )

            for big_k in k_values:
                mu = 0.4
                abel = AbelSplineModel(n, z, big_k)
                abel.params[:] = rng.uniform(-mu, mu, abel.n_params)
                mu_obs = float(np.abs(abel.params).max())
                bound = 4.0 * n + 8.0 * n * math.exp(4.0 * mu_obs * n) * (math.pi**2 / 6.0)

                # Oracle: per-block additive values from the dense rows.
                C = abel.block_coeffs
                sums = np.stack(
                    [
                        sum(rows[j] @ C[b, j] for j in range(n))
                        for b in range(abel.n_blocks)
                    ]
                )
                weight = np.ones_like(sums)
                for k in range(1, big_k + 1):
                    weight[k] = np.exp(sums[k]) / (k * k)
                    weight[big_k + k] = np.exp(sums[big_k + k]) / (k * k)
                l1_abel = (weight * l1[None, :]).sum(axis=0)
                nnz_abel = abel.n_blocks * nnz

                ok_abel = (
                    bool(np.all(nnz_abel <= 4 * n * (2 * big_k + 1)))
                    and bool(np.all(l1_abel < bound))
                    and bool(np.all(nnz_abel > 0))
                )
                results.append(
                    CheckResult(
                        f"abel z={z} n={n} K={big_k}: nnz<=4n(2K+1), l1 below bound, trainable",
                        ok_abel,
                        f"max l1 {l1_abel.max():.3f} < {bound:.3f}",
                    )
                )

                ok_spot = True
                for xr in X[:: max(1, X.shape[0] // 10)]:
                    g = abel.param_grad(xr)
                    if g.nnz > 4 * n * (2 * big_k + 1) or g.nnz == 0 or not g.l1() < bound:
                        ok_spot = False
                results.append(
                    CheckResult(f"abel z={z} n={n} K={big_k}: model gradients match the bounds", ok_spot)
                )

            lookup = LookupTableModel(n, z)
            lookup.params[:] = rng.uniform(-1.0, 1.0, lookup.n_params)
            ok_lookup = True
            for xr in X[:: max(1, X.shape[0] // 25)]:
                g = lookup.param_grad(xr)
                if g.nnz != 1 or g.values[0] != 1.0:
                    ok_lookup = False
            results.append(
                CheckResult(f"lookup z={z} n={n}: gradient is a one-hot everywhere", ok_lookup)
            )
    return results


def check_distal_orthogonality(
    z_values: Sequence[int] = Z_VALUES,
    n_values: Sequence[int] = N_VALUES,
    k_values: Sequence[int] = K_VALUES,
    n_pairs: int = 2000,
) -> list[CheckResult]:
    """Disjoint gradient support (hence exactly-zero dot products) for pairs
    beyond the 1/z threshold: min-abs for splines, max-abs for the lookup."""
    rng = np.random.default_rng(99)
    results = []
    for z in z_values:
        for n in n_values:
            X = rng.uniform(size=(n_pairs, n))
            Y = rng.uniform(size=(n_pairs, n))
            # Opposite corners: dissimilarity exactly 1, distal only once z > 1.
            X[0], Y[0] = np.zeros(n), np.ones(n)
            min_mask = np.abs(X - Y).min(axis=1) > 1.0 / z
            max_mask = np.abs(X - Y).max(axis=1) > 1.0 / z

            spline = SplineAnnModel(n, z)
            spline.params[:] = rng.uniform(-1.0, 1.0, spline.n_params)
            abel = AbelSplineModel(n, z, max(k_values))
            abel.params[:] = rng.uniform(-0.4, 0.4, abel.n_params)
            lookup = LookupTableModel(n, z)
            lookup.params[:] = rng.uniform(-1.0, 1.0, lookup.n_params)

            ok_min = True
            checked_min = 0
            for xa, ya in zip(X[min_mask][:50], Y[min_mask][:50]):
                ga, gb = spline.param_grad(xa), spline.param_grad(ya)
                aa, ab = abel.param_grad(xa), abel.param_grad(ya)
                if not (ga.support_disjoint(gb) and ga.dot(gb) == 0.0):
                    ok_min = False
                if not (aa.support_disjoint(ab) and aa.dot(ab) == 0.0):
                    ok_min = False
                checked_min += 1
            results.append(
                CheckResult(
                    f"min-distal z={z} n={n}: spline/abel gradients disjoint beyond 1/z",
                    ok_min and (checked_min > 0 or z == 1),
                    f"{checked_min} pairs" + (" (vacuous: 1/z spans the domain)" if z == 1 else ""),
                )
            )

            ok_max = True
            checked_max = 0
            for xa, ya in zip(X[max_mask][:50], Y[max_mask][:50]):
                ga, gb = lookup.param_grad(xa), lookup.param_grad(ya)
                if not (ga.support_disjoint(gb) and ga.dot(gb) == 0.0):
                    ok_max = False
                checked_max += 1
            results.append(
                CheckResult(
                    f"max-distal z={z} n={n}: lookup gradients disjoint beyond 1/z",
                    ok_max and (checked_max > 0 or z == 1),
                    f"{checked_max} pairs" + (" (vacuous: 1/z spans the domain)" if z == 1 else ""),
                )
            )
    return results


def fd_param_gradient(model: Model, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of the forward pass w.r.t. every parameter."""
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


def max_relative_gradient_error(model: Model, x: np.ndarray) -> float:
    """Max |fd - analytic| relative to the gradient's own scale."""
    g = model.param_grad(x).to_dense()
    fd = fd_param_gradient(model, x)
    scale = max(1.0, float(np.abs(g).max()))
    return float(np.abs(fd - g).max() / scale)


def point_away_from_kinks(model: ReluMlpModel, rng: np.random.Generator) -> np.ndarray:
    """Resample until every hidden pre-activation has magnitude >= 1e-4."""
    for _ in range(1000):
        x = rng.uniform(size=model.n)
        _, pre = model._forward_saved(x.reshape(1, -1))
        if all(np.abs(a).min() >= 1e-4 for a in pre[:-1]):
            return x
    raise RuntimeError("could not sample a point away from ReLU kinks")


def _fd_models(rng: np.random.Generator) -> list[tuple[str, Model]]:
    lookup = LookupTableModel(2, 5)
    lookup.params[:] = rng.uniform(-1, 1, lookup.n_params)
    spline = SplineAnnModel(2, 5)
    spline.params[:] = rng.uniform(-1, 1, spline.n_params)
    abel = AbelSplineModel(2, 5, 3)
    abel.params[:] = rng.uniform(-0.3, 0.3, abel.n_params)
    deep = init_model(
        InitSpec("glorot_uniform", int(rng.integers(2**63))),
        {"kind": "relu_mlp", "layer_sizes": [2, 16, 16, 1]},
    )
    return [("lookup", lookup), ("spline_ann", spline), ("abel", abel), ("relu_mlp", deep)]


def check_gradients_fd(n_configs: int = 3) -> list[CheckResult]:
    rng = np.random.default_rng(4242)
    results = []
    for _ in range(n_configs):
        for name, model in _fd_models(rng):
            if isinstance(model, ReluMlpModel):
                x = point_away_from_kinks(model, rng)
            else:
                x = rng.uniform(size=model.n)
            err = max_relative_gradient_error(model, x)
            results.append(
                CheckResult(f"finite differences: {name}", err <= 1e-6, f"max rel err {err:.2e}")
            )
    return results


def check_training() -> list[CheckResult]:
    results = []
    params = np.array([1.0, -2.0, 0.25])
    state = fresh_adam_state(3)
    before = params.copy()
    adam_step(state, params, np.zeros(3))
    results.append(
        CheckResult(
            "adam: zero gradient with fresh moments leaves params bit-identical",
            bool(np.all(params == before)),
        )
    )

    model = SplineAnnModel(2, 5)
    rng = np.random.default_rng(5)
    model.params[:] = rng.uniform(-0.05, 0.05, model.n_params)
    twin = model.clone()
    x = rng.uniform(size=(1, 2))
    y = np.array([0.7])
    state = fresh_adam_state(model.n_params)
    train_epochs(model, x, y, TrainConfig(epochs=1, batch_size=1, shuffle_seed=3), state)
    touched = model.params != twin.params
    window = model.param_grad(x[0])
    results.append(
        CheckResult(
            "training: one point touches only window parameters",
            int(touched.sum()) <= 8 and bool(np.all(np.flatnonzero(touched) == window.indices)),
            f"{int(touched.sum())} touched",
        )
    )

    a = twin.clone()
    b = twin.clone()
    data_x = rng.uniform(size=(64, 2))
    data_y = rng.standard_normal(64)
    cfg = TrainConfig(epochs=3, batch_size=16, shuffle_seed=11)
    train_epochs(a, data_x, data_y, cfg, fresh_adam_state(a.n_params))
    train_epochs(b, data_x, data_y, cfg, fresh_adam_state(b.n_params))
    results.append(
        CheckResult("training: same seed, bit-identical trajectories", bool(np.all(a.params == b.params)))
    )
    return results


def check_exact_zero_interference() -> list[CheckResult]:
    """Small-sample version of the exact-zero protocol rows."""
    cfg = McConfig(n_samples=4000, n_trials=3, sample_seed=7, trial_seed=8)
    results = []

    def lookup_factory(seed: int) -> Model:
        return init_model(InitSpec("random_uniform", seed), {"kind": "lookup", "n": 2, "z": 20})

    report = run_interference_trials(
        lookup_factory,
        cfg,
        [DistalSpec("max_abs", 0.1), DistalSpec("max_abs", 0.05), DistalSpec("max_abs", 0.01)],
        label="lookup",
    )
    zeros_ok = (
        report.interference[("max_abs", 0.1)].mean == 0.0
        and report.interference[("max_abs", 0.1)].std == 0.0
        and report.interference[("max_abs", 0.05)].mean == 0.0
    )
    positive_ok = report.interference[("max_abs", 0.01)].mean > 0.0
    results.append(
        CheckResult("interference: lookup max-distal rows exactly zero beyond 1/z", zeros_ok and positive_ok)
    )

    def spline_factory(seed: int) -> Model:
        return init_model(InitSpec("random_uniform", seed), {"kind": "spline_ann", "n": 2, "z": 20})

    report = run_interference_trials(
        spline_factory, cfg, [DistalSpec("min_abs", 0.1), DistalSpec("min_abs", 0.05)], label="spline_ann"
    )
    results.append(
        CheckResult(
            "interference: spline min-distal rows exactly zero beyond 1/z",
            report.interference[("min_abs", 0.1)].mean == 0.0
            and report.interference[("min_abs", 0.05)].mean == 0.0
            and report.interference[("min_abs", 0.05)].std == 0.0,
        )
    )
    return results


def run_property_suites(
    z_values: Sequence[int] = Z_VALUES,
    n_values: Sequence[int] = N_VALUES,
    k_values: Sequence[int] = K_VALUES,
    n_points: int = N_TRAIN_POINTS,
) -> list[CheckResult]:
    """The proposition suite: sparsity, bounds, trainability, orthogonality."""
    results = []
    results += check_activation()
    results += check_basis(z_values)
    results += check_model_propositions(z_values, n_values, k_values, n_points)
    results += check_distal_orthogonality(z_values, n_values, k_values)
    return results


def run_all() -> list[CheckResult]:
    results = run_property_suites()
    results += check_gradients_fd()
    results += check_training()
    results += check_exact_zero_interference()
    return results
