"""Command-line harness: perturbation meter, 2D experiments, selftest.

Every subcommand prints its effective configuration (the run manifest)
before doing any work and writes the same lines to ``<out-dir>/manifest.txt``
next to the CSV/PGM artifacts.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import selfcheck
from .experiments import (
    ExperimentConfig,
    MODEL_NAMES,
    build_model,
    config_lines,
    derived_int_seed,
    render_heatmap,
    run_regression,
    run_sequential,
    target_2d_batch,
    emit_heatmap,
)
from .interference import DistalSpec, McConfig, run_interference_trials, write_reports_csv

EXPERIMENT_COMMANDS = ("perturbation", "regression", "sequential", "rehearsal")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distal",
        description="Spline, lookup, and ReLU models with perturbation and "
        "distal-interference measurements.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "perturbation": "100-trial Monte Carlo perturbation/interference tables",
        "regression": "2D regression on the oscillating product target",
        "sequential": "16-partition sequential curriculum (no rehearsal)",
        "rehearsal": "sequential curriculum with pseudo-rehearsal",
        "selftest": "run the property suites; non-zero exit on any violation",
    }
    for name in EXPERIMENT_COMMANDS + ("selftest",):
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
        sp.add_argument("--out-dir", default=None, help="artifact directory (default runs/<cmd>)")
        sp.add_argument(
            "--models",
            default=None,
            help=f"comma-separated subset of {','.join(MODEL_NAMES)}",
        )
        sp.add_argument("--config", default=None, help="key=value file of config overrides")
    return parser


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Plain key=value lines; blank lines and '#' comments are ignored."""
    overrides: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def _coerce(name: str, raw: str, current) -> object:
    if isinstance(current, bool):
        raise ValueError(f"cannot override {name}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, tuple):
        items = [tok.strip() for tok in raw.split(",") if tok.strip()]
        if all(isinstance(v, float) for v in current):
            return tuple(float(tok) for tok in items)
        return tuple(items)
    return raw


def make_config(command: str, args: argparse.Namespace) -> tuple[ExperimentConfig, list[str]]:
    cfg = ExperimentConfig(experiment=command)
    overridden: list[str] = []
    if args.config:
        file_overrides = parse_config_file(args.config)
        valid = {f.name for f in fields(ExperimentConfig)} - {"experiment"}
        for key, raw in file_overrides.items():
            if key not in valid:
                raise ValueError(f"unknown config key: {key!r}")
            cfg = replace(cfg, **{key: _coerce(key, raw, getattr(cfg, key))})
            overridden.append(key)
    if args.models is not None:
        names = tuple(tok.strip() for tok in args.models.split(",") if tok.strip())
        cfg = replace(cfg, models=names)
        overridden.append("models")
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
        overridden.append("master_seed")
    return cfg, overridden


def _write_csv(path: Path, header: str, rows: list[str]) -> None:
    path.write_text("\n".join([header] + rows) + "\n")


def _run_perturbation(cfg: ExperimentConfig, out_dir: Path) -> None:
    specs = [DistalSpec(kind, d) for kind in ("max_abs", "min_abs") for d in cfg.deltas]
    mc = McConfig(
        n_samples=cfg.mc_samples,
        n_trials=cfg.mc_trials,
        sample_seed=derived_int_seed(cfg.master_seed, "mc-sample"),
        trial_seed=derived_int_seed(cfg.master_seed, "mc-trial"),
        lr=cfg.lr,
    )
    reports = []
    for name in cfg.models:
        factory = lambda seed, _name=name: build_model(_name, cfg, seed)
        reports.append(run_interference_trials(factory, mc, specs, label=name))
        print(f"{name}: perturbation {reports[-1].perturbation_mean:.3e}")
    write_reports_csv(reports, out_dir / "interference.csv")


def _run_regression(cfg: ExperimentConfig, out_dir: Path) -> None:
    results = run_regression(cfg)
    rows = [f"{name},{r.train_mae!r},{r.test_mae!r}" for name, r in results.items()]
    _write_csv(out_dir / "regression_mae.csv", "model,train_mae,test_mae", rows)
    emit_heatmap(render_heatmap(target_2d_batch, cfg.heatmap_resolution), out_dir / "target")
    for name, r in results.items():
        emit_heatmap(r.heatmap, out_dir / f"regression_{name}")
        print(f"{name}: test MAE {r.test_mae:.4f}")


def _run_sequential(cfg: ExperimentConfig, out_dir: Path, rehearsal: bool) -> None:
    results = run_sequential(cfg, rehearsal)
    prefix = "rehearsal" if rehearsal else "sequential"
    rows = [f"{name},{r.final_test_mae!r}" for name, r in results.items()]
    _write_csv(out_dir / f"{prefix}_mae.csv", "model,final_test_mae", rows)
    trace_rows = []
    for name, r in results.items():
        for task, (cell, mae) in enumerate(zip(r.task_order, r.per_task_mae)):
            trace_rows.append(f"{name},{task},{cell},{mae!r}")
        emit_heatmap(r.heatmap, out_dir / f"{prefix}_{name}")
        print(f"{name}: final test MAE {r.final_test_mae:.4f}")
    _write_csv(out_dir / f"{prefix}_trace.csv", "model,task,cell,test_mae", trace_rows)


def cli_main(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on unknown flags
        return exc.code if isinstance(exc.code, int) else 2

    if args.command == "selftest":
        results = selfcheck.run_all()
        for r in results:
            print(r)
        n_failed = sum(not r.passed for r in results)
        print(f"{len(results) - n_failed}/{len(results)} checks passed")
        return 1 if n_failed else 0

    try:
        cfg, overridden = make_config(args.command, args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2

    out_dir = Path(args.out_dir) if args.out_dir else Path("runs") / cfg.experiment
    manifest = config_lines(cfg, overridden)
    print("\n".join(manifest))
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.txt").write_text("\n".join(manifest) + "\n")

    if cfg.experiment == "perturbation":
        _run_perturbation(cfg, out_dir)
    elif cfg.experiment == "regression":
        _run_regression(cfg, out_dir)
    elif cfg.experiment == "sequential":
        _run_sequential(cfg, out_dir, rehearsal=False)
    elif cfg.experiment == "rehearsal":
        _run_sequential(cfg, out_dir, rehearsal=True)
    return 0


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
