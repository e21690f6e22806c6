"""Mini-batch Adam training with MAE/MSE losses and seeded shuffling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import Model
from .splines import check_unit_interval

LOSS_KINDS = ("mae", "mse")


def loss_value_and_dloss(kind: str, prediction, target):
    """Per-sample loss and its derivative w.r.t. the prediction.

    MAE uses sign(p - y) with sign(0) = 0; MSE uses 2(p - y). Works on
    scalars and arrays alike.
    """
    p = np.asarray(prediction, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite input")
    d = p - y
    if kind == "mae":
        return np.abs(d), np.sign(d)
    if kind == "mse":
        return d * d, 2.0 * d
    raise ValueError(f"unknown loss kind: {kind!r}")


@dataclass
class AdamState:
    """Adam moments and step counter for one flat parameter vector.

    A step whose gradient entry is 0 while both moments at that index are 0
    leaves the corresponding parameter bit-identical: the moment updates and
    the 0/(0 + eps) parameter update are all exact zeros.
    """

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def fresh_adam_state(n_params: int, lr: float = 0.001) -> AdamState:
    return AdamState(m=np.zeros(n_params), v=np.zeros(n_params), lr=lr)


def adam_step(state: AdamState, params: np.ndarray, batch_grad: np.ndarray):
    """One canonical Adam update with bias correction, in place."""
    g = np.asarray(batch_grad, dtype=np.float64)
    if g.shape != params.shape or g.shape != state.m.shape:
        raise ValueError("size mismatch between params, gradient, and optimizer state")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    params -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int
    loss: str = "mae"
    shuffle_seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind: {self.loss!r}")


def train_epochs(
    model: Model, xs: np.ndarray, ys: np.ndarray, cfg: TrainConfig, state: AdamState
):
    """Train in place: seeded per-epoch shuffle, mean batch gradient, one Adam
    step per batch (the last batch of an epoch may be short)."""
    X = np.asarray(xs, dtype=np.float64)
    Y = np.asarray(ys, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or X.shape[1] != model.n:
        raise ValueError(f"dimension mismatch: expected inputs of shape (*, {model.n})")
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    if X.shape[0] != Y.shape[0]:
        raise ValueError("dimension mismatch: inputs and targets differ in length")
    check_unit_interval(X)

    rng = np.random.default_rng(cfg.shuffle_seed)
    n_params = model.n_params
    for _ in range(cfg.epochs):
        perm = rng.permutation(X.shape[0])
        for start in range(0, X.shape[0], cfg.batch_size):
            sel = perm[start : start + cfg.batch_size]
            Xb = X[sel]
            preds = model.forward_batch(Xb)
            _, dloss = loss_value_and_dloss(cfg.loss, preds, Y[sel])
            gbuf = np.zeros(n_params)
            model.add_batch_grad(Xb, dloss / sel.size, gbuf)
            adam_step(state, model.params, gbuf)
    return model, state


def evaluate_mae(model: Model, xs: np.ndarray, ys: np.ndarray) -> float:
    X = np.asarray(xs, dtype=np.float64)
    Y = np.asarray(ys, dtype=np.float64).reshape(-1)
    return float(np.abs(model.forward_batch(X) - Y).mean())
