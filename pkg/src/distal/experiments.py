"""Experiment orchestration: 2D regression, the 16-partition sequential
curriculum with optional pseudo-rehearsal, and CSV/heatmap artifacts.

Every run is a pure function of (config, master_seed): all randomness flows
through named substreams of the master seed, so repeated runs produce
byte-identical artifacts.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .models import InitSpec, Model, init_model
from .training import TrainConfig, evaluate_mae, fresh_adam_state, train_epochs

MODEL_NAMES = ("lookup", "spline_ann", "abel", "wide_relu", "deep_relu")

GRID_SIDE = 4  # the sequential curriculum tiles [0,1]^2 into 4x4 cells

HEATMAP_LO = -1.2
HEATMAP_HI = 1.2


def stream_seed(master_seed: int, *tags) -> list[int]:
    """Entropy for a named, order-independent substream of the master seed."""
    ent = [int(master_seed)]
    for t in tags:
        ent.append(zlib.crc32(t.encode()) if isinstance(t, str) else int(t))
    return ent


def stream_rng(master_seed: int, *tags) -> np.random.Generator:
    return np.random.default_rng(stream_seed(master_seed, *tags))


def derived_int_seed(master_seed: int, *tags) -> int:
    return int(stream_rng(master_seed, *tags).integers(2**63))


@dataclass(frozen=True)
class ExperimentConfig:
    """Defaults reproduce the reference protocol; overrides are echoed into
    the run manifest."""

    experiment: str = "regression"
    models: tuple[str, ...] = MODEL_NAMES
    z: int = 20
    big_k: int = 6
    n_train: int = 16000
    epochs: int = 200
    batch: int = 100
    lr: float = 0.001
    partitions: int = 16
    points_per_partition: int = 1000
    rehearsal_points: int = 1000
    n_test: int = 10000
    heatmap_resolution: int = 200
    mc_samples: int = 100_000
    mc_trials: int = 100
    deltas: tuple[float, ...] = (0.1, 0.05, 0.01)
    master_seed: int = 0

    def __post_init__(self) -> None:
        unknown = [m for m in self.models if m not in MODEL_NAMES]
        if unknown:
            raise ValueError(f"unknown models: {unknown}; choose from {MODEL_NAMES}")
        if not self.models:
            raise ValueError("model set must not be empty")
        if self.partitions != GRID_SIDE * GRID_SIDE:
            raise ValueError("partitions must be 16 (a 4x4 grid)")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")


def build_model(name: str, cfg: ExperimentConfig, seed: int) -> Model:
    """The five-model roster, all with 2-D input."""
    if name == "lookup":
        return init_model(InitSpec("random_uniform", seed), {"kind": "lookup", "n": 2, "z": cfg.z})
    if name == "spline_ann":
        return init_model(
            InitSpec("random_uniform", seed), {"kind": "spline_ann", "n": 2, "z": cfg.z}
        )
    if name == "abel":
        return init_model(
            InitSpec("random_uniform", seed),
            {"kind": "abel", "n": 2, "z": cfg.z, "big_k": cfg.big_k},
        )
    if name == "wide_relu":
        return init_model(
            InitSpec("glorot_uniform", seed), {"kind": "relu_mlp", "layer_sizes": [2, 1000, 1]}
        )
    if name == "deep_relu":
        return init_model(
            InitSpec("glorot_uniform", seed),
            {"kind": "relu_mlp", "layer_sizes": [2] + [16] * 8 + [1]},
        )
    raise ValueError(f"unknown model name: {name!r}")


def target_2d_batch(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError("dimension mismatch: expected inputs of shape (*, 2)")
    if not np.all((X >= 0.0) & (X <= 1.0)):
        raise ValueError("domain violation: x must lie in [0, 1]^2")
    return np.sin(4.0 * np.pi * X[:, 0]) * np.sin(4.0 * np.pi * X[:, 1])


def target_2d(x: Sequence[float]) -> float:
    """Product of two oscillating factors; four sign lobes per axis pair."""
    return float(target_2d_batch(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


@dataclass
class PartitionPlan:
    """4x4 tiling of the unit square and a seeded visiting order."""

    order: tuple[int, ...]

    def __post_init__(self) -> None:
        if sorted(self.order) != list(range(GRID_SIDE * GRID_SIDE)):
            raise ValueError("order must be a permutation of 0..15")

    @staticmethod
    def cell_bounds(cell: int) -> tuple[tuple[float, float], tuple[float, float]]:
        """((x1_lo, x1_hi), (x2_lo, x2_hi)) of one grid cell."""
        row, col = divmod(cell, GRID_SIDE)
        w = 1.0 / GRID_SIDE
        return ((col * w, (col + 1) * w), (row * w, (row + 1) * w))

    @staticmethod
    def cell_of(x: np.ndarray) -> int:
        col = min(int(x[0] * GRID_SIDE), GRID_SIDE - 1)
        row = min(int(x[1] * GRID_SIDE), GRID_SIDE - 1)
        return row * GRID_SIDE + col


def make_partition_plan(cfg: ExperimentConfig) -> PartitionPlan:
    rng = stream_rng(cfg.master_seed, "partition-order")
    return PartitionPlan(order=tuple(int(c) for c in rng.permutation(GRID_SIDE * GRID_SIDE)))


def sample_in_cell(rng: np.random.Generator, cell: int, count: int) -> np.ndarray:
    (x1_lo, x1_hi), (x2_lo, x2_hi) = PartitionPlan.cell_bounds(cell)
    u = rng.uniform(size=(count, 2))
    out = np.empty_like(u)
    out[:, 0] = x1_lo + u[:, 0] * (x1_hi - x1_lo)
    out[:, 1] = x2_lo + u[:, 1] * (x2_hi - x2_lo)
    return out


@dataclass
class Heatmap:
    """Model outputs on an RxR grid of cell centers; row r holds x2 = (r+0.5)/R."""

    resolution: int
    values: np.ndarray


def render_heatmap(fn_batch, resolution: int) -> Heatmap:
    centers = (np.arange(resolution) + 0.5) / resolution
    x1, x2 = np.meshgrid(centers, centers)  # x1 varies along columns, x2 along rows
    X = np.column_stack([x1.ravel(), x2.ravel()])
    values = np.asarray(fn_batch(X), dtype=np.float64).reshape(resolution, resolution)
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite input")
    return Heatmap(resolution=resolution, values=values)


def heatmap_pixels(values: np.ndarray) -> np.ndarray:
    """8-bit gray levels: clamp to [-1.2, 1.2], map linearly, round half up.

    A value of exactly 0 maps to 127.5 and therefore to pixel 128.
    """
    t = (np.clip(values, HEATMAP_LO, HEATMAP_HI) - HEATMAP_LO) / (HEATMAP_HI - HEATMAP_LO)
    return np.floor(t * 255.0 + 0.5).astype(np.uint8)


def emit_heatmap(h: Heatmap, base_path) -> tuple[Path, Path]:
    """Write <base>.csv (full-precision grid) and <base>.pgm (binary graymap).

    Row 0 of both files is the x2 = 0 edge. The CSV uses repr floats, so
    parsing it back reproduces the grid bit-exactly.
    """
    base = Path(base_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path = base.with_name(base.name + ".csv")
    pgm_path = base.with_name(base.name + ".pgm")

    lines = [",".join(repr(float(v)) for v in row) for row in h.values]
    csv_path.write_text("\n".join(lines) + "\n")

    pixels = heatmap_pixels(h.values)
    header = f"P5\n{h.resolution} {h.resolution}\n255\n".encode("ascii")
    pgm_path.write_bytes(header + pixels.tobytes())
    return csv_path, pgm_path


def parse_heatmap_csv(path) -> Heatmap:
    rows = [
        [float(tok) for tok in line.split(",")]
        for line in Path(path).read_text().strip().split("\n")
    ]
    values = np.asarray(rows, dtype=np.float64)
    return Heatmap(resolution=values.shape[0], values=values)


def _test_set(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    # One shared test stream: regression and sequential runs score on the
    # same points, so their MAEs are directly comparable.
    rng = stream_rng(cfg.master_seed, "test-set")
    X = rng.uniform(size=(cfg.n_test, 2))
    return X, target_2d_batch(X)


def _train_config(cfg: ExperimentConfig, *tags) -> TrainConfig:
    return TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch,
        loss="mae",
        shuffle_seed=derived_int_seed(cfg.master_seed, "shuffle", *tags),
    )


@dataclass
class RegressionResult:
    train_mae: float
    test_mae: float
    heatmap: Heatmap


def run_regression(cfg: ExperimentConfig) -> dict[str, RegressionResult]:
    """Uniform 2-D regression on the oscillating product target."""
    rng = stream_rng(cfg.master_seed, "regression-train")
    X = rng.uniform(size=(cfg.n_train, 2))
    Y = target_2d_batch(X)
    X_test, Y_test = _test_set(cfg)

    results = {}
    for name in cfg.models:
        model = build_model(name, cfg, derived_int_seed(cfg.master_seed, "init", name))
        state = fresh_adam_state(model.n_params, lr=cfg.lr)
        train_epochs(model, X, Y, _train_config(cfg, name), state)
        results[name] = RegressionResult(
            train_mae=evaluate_mae(model, X, Y),
            test_mae=evaluate_mae(model, X_test, Y_test),
            heatmap=render_heatmap(model.forward_batch, cfg.heatmap_resolution),
        )
    return results


@dataclass
class RehearsalAudit:
    """A few rehearsal pairs plus the snapshot that labeled them."""

    snapshot: Model
    inputs: np.ndarray
    labels: np.ndarray


@dataclass
class SequentialResult:
    final_test_mae: float
    per_task_mae: list[float]
    heatmap: Heatmap
    task_order: tuple[int, ...]
    rehearsal_audits: list[RehearsalAudit] = field(default_factory=list)


def run_sequential(cfg: ExperimentConfig, rehearsal: bool) -> dict[str, SequentialResult]:
    """Train on the 16 partitions one after another, in a seeded order.

    With rehearsal, each task's points are augmented with fresh uniform
    inputs labeled by the model snapshot taken before that task's training.
    Optimizer state is reset for every task.
    """
    plan = make_partition_plan(cfg)
    X_test, Y_test = _test_set(cfg)

    task_data = []
    for t, cell in enumerate(plan.order):
        pts = sample_in_cell(
            stream_rng(cfg.master_seed, "task-data", t), cell, cfg.points_per_partition
        )
        task_data.append((pts, target_2d_batch(pts)))

    results = {}
    for name in cfg.models:
        model = build_model(name, cfg, derived_int_seed(cfg.master_seed, "init", name))
        per_task_mae = []
        audits = []
        for t, cell in enumerate(plan.order):
            X_task, Y_task = task_data[t]
            if rehearsal:
                snapshot = model.clone()
                u = stream_rng(cfg.master_seed, "rehearsal", name, t).uniform(
                    size=(cfg.rehearsal_points, 2)
                )
                labels = snapshot.forward_batch(u)
                X_task = np.concatenate([X_task, u])
                Y_task = np.concatenate([Y_task, labels])
                audits.append(RehearsalAudit(snapshot=snapshot, inputs=u[:4], labels=labels[:4]))
            state = fresh_adam_state(model.n_params, lr=cfg.lr)
            train_epochs(model, X_task, Y_task, _train_config(cfg, name, t), state)
            per_task_mae.append(evaluate_mae(model, X_test, Y_test))
        results[name] = SequentialResult(
            final_test_mae=per_task_mae[-1],
            per_task_mae=per_task_mae,
            heatmap=render_heatmap(model.forward_batch, cfg.heatmap_resolution),
            task_order=plan.order,
            rehearsal_audits=audits,
        )
    return results


def config_lines(cfg: ExperimentConfig, overrides: Sequence[str] = ()) -> list[str]:
    """key=value lines for the manifest, stable order, no timestamps."""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name}={value}")
    lines.append(f"overrides={','.join(sorted(overrides)) if overrides else 'none'}")
    if cfg.experiment in ("sequential", "rehearsal"):
        order = make_partition_plan(cfg).order
        lines.append(f"partition_order={','.join(str(c) for c in order)}")
    return lines
