"""Monte Carlo meters for single-update model perturbation and distal interference.

Perturbation is the L1 function-norm distance between a model before and
after one training update, estimated over the unit cube. Distal interference
restricts the same integrand to the points whose dissimilarity from the
training input strictly exceeds a threshold; the estimate keeps the
full-domain uniform measure (indicator method), so it is always bounded by
the perturbation of the same trial.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .models import Model
from .training import TrainConfig, fresh_adam_state, train_epochs

DISSIMILARITY_KINDS = ("max_abs", "min_abs")


@dataclass(frozen=True)
class DistalSpec:
    """Dissimilarity kind plus the strict threshold selecting distal points."""

    kind: str
    delta: float

    def __post_init__(self) -> None:
        if self.kind not in DISSIMILARITY_KINDS:
            raise ValueError(f"unknown dissimilarity kind: {self.kind!r}")
        if not self.delta > 0.0:
            raise ValueError("delta must be > 0")


def dissimilarity(x: Sequence[float], v: Sequence[float], kind: str) -> float:
    """Max or min of the coordinate-wise absolute differences."""
    xa = np.asarray(x, dtype=np.float64)
    va = np.asarray(v, dtype=np.float64)
    if xa.shape != va.shape or xa.ndim != 1:
        raise ValueError("dimension mismatch")
    return float(dissimilarity_batch(xa.reshape(1, -1), va, kind)[0])


def dissimilarity_batch(X: np.ndarray, v: np.ndarray, kind: str) -> np.ndarray:
    if kind not in DISSIMILARITY_KINDS:
        raise ValueError(f"unknown dissimilarity kind: {kind!r}")
    X = np.asarray(X, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if X.ndim != 2 or v.shape != (X.shape[1],):
        raise ValueError("dimension mismatch")
    diffs = np.abs(X - v)
    return diffs.max(axis=1) if kind == "max_abs" else diffs.min(axis=1)


def _checked_samples(f_before: Model, f_after: Model, samples: np.ndarray) -> np.ndarray:
    if f_before.n != f_after.n:
        raise ValueError("dimension mismatch: models disagree on input dimension")
    X = np.asarray(samples, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != f_before.n:
        raise ValueError(f"dimension mismatch: expected samples of shape (*, {f_before.n})")
    if X.shape[0] == 0:
        raise ValueError("empty sample set")
    return X


def _abs_diff(f_before: Model, f_after: Model, X: np.ndarray) -> np.ndarray:
    return np.abs(f_after.forward_batch(X) - f_before.forward_batch(X))


def _masked_mean(diff: np.ndarray, X: np.ndarray, v, spec: DistalSpec) -> tuple[float, int]:
    mask = dissimilarity_batch(X, v, spec.kind) > spec.delta
    return float(diff[mask].sum() / diff.size), int(mask.sum())


def perturbation_mc(f_before: Model, f_after: Model, samples: np.ndarray) -> float:
    """Monte Carlo estimate of the L1 distance between the two models."""
    X = _checked_samples(f_before, f_after, samples)
    return float(_abs_diff(f_before, f_after, X).mean())


def distal_interference_mc(
    f_before: Model, f_after: Model, v, spec: DistalSpec, samples: np.ndarray
) -> float:
    """L1 change restricted to points strictly farther than delta from v.

    Estimated against the full-domain uniform measure; returns 0.0 when no
    sample is distal.
    """
    X = _checked_samples(f_before, f_after, samples)
    value, _ = _masked_mean(_abs_diff(f_before, f_after, X), X, v, spec)
    return value


@dataclass
class McConfig:
    """Sampling plan for the repeated-trial protocol.

    Per trial: fresh seeded model, one training input drawn uniformly from
    the cube with a standard-normal target, one Adam update on that single
    pair, then a fresh uniform sample to estimate the integrals.
    """

    n_samples: int = 100_000
    n_trials: int = 100
    sample_seed: int = 0
    trial_seed: int = 1
    lr: float = 0.001

    def __post_init__(self) -> None:
        if self.n_samples < 1 or self.n_trials < 1:
            raise ValueError("n_samples and n_trials must be >= 1")


@dataclass
class InterferenceCell:
    mean: float
    std: float
    empty_trials: int = 0  # trials whose distal point set caught no samples

    @property
    def empty(self) -> bool:
        return self.empty_trials > 0


@dataclass
class TrialReport:
    """Mean and population std over trials, plus the per-trial values."""

    label: str
    perturbation_mean: float
    perturbation_std: float
    interference: dict
    trials: int
    perturbation_per_trial: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]
    interference_per_trial: dict = field(repr=False, default_factory=dict)


def _population_stats(values: np.ndarray) -> tuple[float, float]:
    return float(values.mean()), float(values.std(ddof=0))


def run_interference_trials(
    model_factory: Callable[[int], Model],
    cfg: McConfig,
    specs: Sequence[DistalSpec],
    label: str = "model",
) -> TrialReport:
    """Run the repeated-trial protocol for one model family.

    ``model_factory`` receives a derived 63-bit seed and must return a
    freshly initialised model. Training inputs, targets, and Monte Carlo
    samples are driven only by the config seeds and the trial index, so
    different model families measured under the same config see identical
    trial data.
    """
    perturbations = np.empty(cfg.n_trials)
    per_spec = {(s.kind, s.delta): np.empty(cfg.n_trials) for s in specs}
    empty_counts = {(s.kind, s.delta): 0 for s in specs}

    for i in range(cfg.n_trials):
        data_rng = np.random.default_rng([cfg.trial_seed, i, 0])
        model_seed = int(np.random.default_rng([cfg.trial_seed, i, 1]).integers(2**63))
        before = model_factory(model_seed)
        v = data_rng.uniform(size=before.n)
        y = data_rng.standard_normal()

        after = before.clone()
        state = fresh_adam_state(after.n_params, lr=cfg.lr)
        train_epochs(
            after,
            v.reshape(1, -1),
            np.array([y]),
            TrainConfig(epochs=1, batch_size=1, loss="mae", shuffle_seed=0),
            state,
        )

        X = np.random.default_rng([cfg.sample_seed, i]).uniform(size=(cfg.n_samples, before.n))
        diff = _abs_diff(before, after, X)
        perturbations[i] = diff.mean()
        for spec in specs:
            value, n_distal = _masked_mean(diff, X, v, spec)
            per_spec[(spec.kind, spec.delta)][i] = value
            if n_distal == 0:
                empty_counts[(spec.kind, spec.delta)] += 1

    p_mean, p_std = _population_stats(perturbations)
    cells = {}
    for key, values in per_spec.items():
        mean, std = _population_stats(values)
        cells[key] = InterferenceCell(mean=mean, std=std, empty_trials=empty_counts[key])
    return TrialReport(
        label=label,
        perturbation_mean=p_mean,
        perturbation_std=p_std,
        interference=cells,
        trials=cfg.n_trials,
        perturbation_per_trial=perturbations,
        interference_per_trial=per_spec,
    )


def write_reports_csv(reports: Sequence[TrialReport], path) -> None:
    """One row per metric cell: model, metric, kind, delta, mean, std.

    Floats are written with repr so exact zeros stay "0.0" and everything
    round-trips; the perturbation rows leave kind and delta blank.
    """
    lines = ["model,metric,kind,delta,mean,std"]
    for r in reports:
        lines.append(
            f"{r.label},perturbation,,,{r.perturbation_mean!r},{r.perturbation_std!r}"
        )
        for (kind, delta), cell in r.interference.items():
            lines.append(
                f"{r.label},distal_interference,{kind},{float(delta)!r},{cell.mean!r},{cell.std!r}"
            )
    Path(path).write_text("\n".join(lines) + "\n")
