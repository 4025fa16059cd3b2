"""Command-line orchestration.

Subcommands: ``gen-formation``, ``gen-flocking``, ``train``, ``eval``,
``baseline``.  Every run is driven by a JSON config plus a handful of flags;
rerunning any subcommand with the same config reproduces its outputs.  The
``GRAPHIDENT_LOG`` environment variable sets log verbosity.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import dataio, evaluate, training
from .datagen import (FlockingSpec, FormationSpec, SampleRecord,
                      generate_flocking_windows, sample_er_graph,
                      sample_smooth_signals)
from .encoder import flocking_params, formation_params
from .errors import (ConfigError, GraphIdentError, InvariantError,
                     NumericalFailure, OracleFailure, SchemaError,
                     SimulationError, TrainStepError)
from .graphcore import edge_density

log = logging.getLogger("graphident.cli")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def _field(cfg: dict, name: str, kind, default=None, required=False):
    """Fetch a config field with a field-level error message."""
    if name not in cfg:
        if required:
            raise ConfigError(f"missing required config field {name!r}",
                              field=name)
        return default
    value = cfg[name]
    if kind is float and isinstance(value, int):
        value = float(value)
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(
            f"config field {name!r} must be {getattr(kind, '__name__', kind)}, "
            f"got {type(value).__name__}", field=name)
    return value


def _ensure_out(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_summary(pairs):
    for key, value in pairs:
        print(f"{key}: {value}")


# --- subcommands ---------------------------------------------------------------


def cmd_gen_formation(args) -> int:
    cfg = _load_config(args.config)
    try:
        spec = FormationSpec(
            n=_field(cfg, "n", int, 20),
            p=_field(cfg, "p", float, 0.2),
            sigma=_field(cfg, "sigma", float, 0.1),
            d=_field(cfg, "d", int, 10000 if args.full_scale else 2000),
            seed=args.seed if args.seed is not None
            else _field(cfg, "seed", int, 0),
        )
    except InvariantError as exc:
        raise ConfigError(f"invalid formation spec: {exc}") from exc
    windows = _field(cfg, "windows", int, 1)
    if windows < 1:
        raise ConfigError("config field 'windows' must be at least 1",
                          field="windows")

    W = sample_er_graph(spec.n, spec.p, spec.seed)
    records = []
    for k in range(windows):
        X = sample_smooth_signals(W, spec.sigma, spec.d, spec.seed + 1 + k)
        records.append(SampleRecord(X=X, W=W, meta=dict(spec.to_dict(), window=k)))

    out = _ensure_out(args.out)
    path = out / "dataset.gids"
    dataio.write_dataset(records, path, spec=spec.to_dict())
    _print_summary([
        ("dataset", path),
        ("kind", "formation"),
        ("n", spec.n), ("p", spec.p), ("sigma", spec.sigma), ("d", spec.d),
        ("windows", windows),
        ("edge_density", f"{edge_density(W):.6f}"),
    ])
    return EXIT_OK


def _flocking_spec_from(cfg: dict, seed_override=None,
                        full_scale: bool = False) -> FlockingSpec:
    goal = cfg.get("goal", [0.0, 0.0])
    if (not isinstance(goal, (list, tuple))) or len(goal) != 2:
        raise ConfigError("config field 'goal' must be [x, y]", field="goal")
    try:
        return _build_flocking_spec(cfg, goal, seed_override, full_scale)
    except InvariantError as exc:
        raise ConfigError(f"invalid flocking spec: {exc}") from exc


def _build_flocking_spec(cfg, goal, seed_override, full_scale) -> FlockingSpec:
    return FlockingSpec(
        n=_field(cfg, "n", int, 50 if full_scale else 20),
        rho=_field(cfg, "rho", float, 0.7),
        r_comm=_field(cfg, "r_comm", float, 1.2),
        duration=_field(cfg, "duration", float, 6.0),
        dt=_field(cfg, "dt", float, 0.04),
        spawn_side=_field(cfg, "spawn_side", float, 5.0),
        goal=(float(goal[0]), float(goal[1])),
        eps=_field(cfg, "eps", float, 0.1),
        a=_field(cfg, "a", float, 5.0),
        b=_field(cfg, "b", float, 5.0),
        h=_field(cfg, "h", float, 0.2),
        c1=_field(cfg, "c1", float, 0.4),
        c2=_field(cfg, "c2", float, 0.8),
        d=_field(cfg, "d", int, 10),
        seed=seed_override if seed_override is not None
        else _field(cfg, "seed", int, 0),
    )


def cmd_gen_flocking(args) -> int:
    cfg = _load_config(args.config)
    spec = _flocking_spec_from(cfg, seed_override=args.seed,
                               full_scale=args.full_scale)
    records = generate_flocking_windows(spec)
    densities = [edge_density(r.W) for r in records]

    out = _ensure_out(args.out)
    path = out / "dataset.gids"
    dataio.write_dataset(records, path, spec=spec.to_dict())
    _print_summary([
        ("dataset", path),
        ("kind", "flocking"),
        ("n", spec.n), ("rho", spec.rho), ("r_comm", spec.r_comm),
        ("windows", len(records)),
        ("density_min", f"{min(densities):.6f}"),
        ("density_max", f"{max(densities):.6f}"),
    ])
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    records, header = dataio.read_dataset(args.dataset)
    kind = header.get("kind", "formation")

    if "grad_clip" in cfg and cfg["grad_clip"] is None:
        grad_clip = None
    else:
        grad_clip = _field(cfg, "grad_clip", (int, float), 10.0)
    train_cfg = training.TrainConfig(
        learning_rate=_field(cfg, "learning_rate", float, 0.001),
        unroll_steps=_field(cfg, "unroll_steps", int, 30),
        total_steps=_field(cfg, "total_steps", int, 10000),
        sample_refresh_period=_field(cfg, "sample_refresh_period", int, 500),
        grad_clip=grad_clip,
        presolve_iters=_field(cfg, "presolve_iters", int, 300),
        resample_windows=_field(cfg, "resample_windows", bool, True),
        seed=args.seed if args.seed is not None else _field(cfg, "seed", int, 0),
    )

    out = _ensure_out(args.out)
    metrics_path = out / "metrics.csv"
    checkpoint_path = out / "checkpoint.json"

    if args.resume:
        state, _ = training.load_train_state(args.resume)
        params = None
    else:
        state = None
        encoder_seed = _field(cfg, "encoder_seed", int, 0)
        if kind == "flocking":
            params = flocking_params(seed=encoder_seed)
        else:
            params = formation_params(seed=encoder_seed)

    state, metrics = training.train(records, train_cfg, params=params,
                                    state=state, metrics_path=metrics_path)
    training.save_train_state(state, train_cfg, checkpoint_path)
    final = metrics[-1] if metrics else {"loss": float("nan"),
                                         "mae": float("nan")}
    _print_summary([
        ("checkpoint", checkpoint_path),
        ("metrics", metrics_path),
        ("kind", kind),
        ("steps", state.step),
        ("final_loss", f"{final['loss']:.6f}"),
        ("final_mae", f"{final['mae']:.6f}"),
    ])
    return EXIT_OK


def _formation_grid_from(cfg: dict, args) -> evaluate.FormationGrid:
    if args.full_scale:
        defaults = dict(n_values=(10, 20, 30, 40, 50, 60),
                        p_values=(0.1, 0.2, 0.4), d=10000, repetitions=20)
    else:
        defaults = dict(n_values=(10, 20, 30), p_values=(0.2,), d=2000,
                        repetitions=20)
    return evaluate.FormationGrid(
        n_values=tuple(_field(cfg, "n_values", list, list(defaults["n_values"]))),
        p_values=tuple(_field(cfg, "p_values", list, list(defaults["p_values"]))),
        repetitions=_field(cfg, "repetitions", int, defaults["repetitions"]),
        d=_field(cfg, "d", int, defaults["d"]),
        sigma=_field(cfg, "sigma", float, 0.1),
        seed=args.seed if args.seed is not None else _field(cfg, "seed", int, 0),
        max_iters=_field(cfg, "max_iters", int, 2000),
        tol=_field(cfg, "tol", float, 1e-5),
        threshold=_field(cfg, "threshold", float, evaluate.RECOVERY_THRESHOLD),
    )


def _eval_common(args, fixed: tuple[float, float] | None) -> int:
    cfg = _load_config(args.config)
    kind = _field(cfg, "kind", str, "formation")
    params = None
    if fixed is None:
        checkpoint = args.checkpoint or _field(cfg, "checkpoint", str)
        if checkpoint is None:
            raise ConfigError("eval needs --checkpoint or a checkpoint field",
                              field="checkpoint")
        state, _ = training.load_train_state(checkpoint)
        params = state.params
    out = _ensure_out(args.out)

    dataset = getattr(args, "dataset", None)
    if dataset is not None:
        # Evaluate the stored windows directly, one report row per dataset.
        records, _ = dataio.read_dataset(dataset)
        summary, detail = evaluate.flocking_sweep(
            params=params, fixed=fixed,
            max_iters=_field(cfg, "max_iters", int, 2000),
            tol=_field(cfg, "tol", float, 1e-5), workers=args.workers,
            records_by_config=[records])
        evaluate.write_csv(summary, out / "report.csv",
                           evaluate.FLOCKING_SUMMARY_COLUMNS)
        evaluate.write_csv(detail, out / "windows.csv",
                           evaluate.FLOCKING_DETAIL_COLUMNS)
        _print_summary([("report", out / "report.csv"),
                        ("mae", f"{summary[0]['mae_mean']:.6f}")])
        return EXIT_OK

    if kind == "formation":
        grid = _formation_grid_from(cfg, args)
        summary, detail, matrices = evaluate.formation_sweep(
            grid, params=params, fixed=fixed, workers=args.workers)
        evaluate.write_csv(summary, out / "report.csv",
                           evaluate.FORMATION_SUMMARY_COLUMNS)
        evaluate.write_csv(detail, out / "details.csv",
                           evaluate.FORMATION_DETAIL_COLUMNS)
        mat_dir = out / "matrices"
        mat_dir.mkdir(exist_ok=True)
        for (n, p), (W, W_hat) in matrices.items():
            tag = f"n{n}_p{p}"
            evaluate.write_matrix_csv(W, mat_dir / f"{tag}_truth.csv")
            evaluate.write_matrix_csv(W_hat, mat_dir / f"{tag}_identified.csv")
        _print_summary([("report", out / "report.csv")] + [
            (f"mae[n={row['n']},p={row['p']}]", f"{row['mae_mean']:.6f}")
            for row in summary])
    elif kind == "flocking":
        spec_dicts = _field(cfg, "configs", list, [{}])
        specs = [_flocking_spec_from(sd, full_scale=args.full_scale)
                 for sd in spec_dicts]
        summary, detail = evaluate.flocking_sweep(
            specs, params=params, fixed=fixed,
            max_iters=_field(cfg, "max_iters", int, 2000),
            tol=_field(cfg, "tol", float, 1e-5), workers=args.workers)
        evaluate.write_csv(summary, out / "report.csv",
                           evaluate.FLOCKING_SUMMARY_COLUMNS)
        evaluate.write_csv(detail, out / "windows.csv",
                           evaluate.FLOCKING_DETAIL_COLUMNS)
        _print_summary([("report", out / "report.csv")] + [
            (f"mae[config={row['config']}]", f"{row['mae_mean']:.6f}")
            for row in summary])
    else:
        raise ConfigError(f"unknown eval kind {kind!r}", field="kind")
    return EXIT_OK


def cmd_eval(args) -> int:
    return _eval_common(args, fixed=None)


def cmd_baseline(args) -> int:
    cfg = _load_config(args.config)
    alpha = args.alpha if args.alpha is not None else _field(cfg, "alpha", float)
    beta = args.beta if args.beta is not None else _field(cfg, "beta", float)
    if alpha is None or beta is None:
        raise ConfigError("baseline needs alpha and beta (flags or config)",
                          field="alpha")
    return _eval_common(args, fixed=(float(alpha), float(beta)))


# --- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphident",
        description="Graph topology identification from node trajectories")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=False, checkpoint=False, alpha_beta=False):
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--workers", type=int, default=1,
                       help="worker threads for sweeps")
        p.add_argument("--full-scale", action="store_true",
                       help="full-scale experiment defaults instead of desk-scale")
        if dataset:
            p.add_argument("--dataset", required=True, help="dataset file")
            p.add_argument("--resume", default=None,
                           help="checkpoint to resume from")
        if checkpoint:
            p.add_argument("--checkpoint", default=None,
                           help="trained checkpoint path")
        if alpha_beta:
            p.add_argument("--alpha", type=float, default=None)
            p.add_argument("--beta", type=float, default=None)

    p = sub.add_parser("gen-formation", help="generate a formation dataset")
    common(p)
    p.set_defaults(func=cmd_gen_formation)

    p = sub.add_parser("gen-flocking", help="simulate and window a flock")
    common(p)
    p.set_defaults(func=cmd_gen_flocking)

    p = sub.add_parser("train", help="train the encoder on a dataset")
    common(p, dataset=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained checkpoint")
    common(p, checkpoint=True)
    p.add_argument("--dataset", default=None,
                   help="evaluate stored windows instead of generating")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="fixed-parameter identification sweep")
    common(p, alpha_beta=True)
    p.add_argument("--dataset", default=None,
                   help="evaluate stored windows instead of generating")
    p.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("GRAPHIDENT_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, OracleFailure, SimulationError,
            TrainStepError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GraphIdentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
