"""Command-line entry point.

Subcommands:
  evaluate       run the configured models over all evaluation windows
                 and write per-window records, a summary table, and a
                 run manifest
  predict        export one agent's multi-modal prediction at a given
                 time for inspection or plotting
  sorted-errors  re-order a records file by one model's ADE

Exit codes: 0 success, 1 invalid configuration or arguments, 2 I/O or
input-data failure, 3 no evaluation windows.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import (ConfigError, MODEL_NAMES, RunConfig, apply_overrides,
                     load_config, write_manifest)
from .dataset import DatasetError
from .geometry import LaneGeometryError
from .metrics import ErrorRecord, sorted_errors, summarize
from .pipeline import (_heading_change, build_scene, evaluate_scene,
                       pf_state_at, predict_modeset)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_NO_WINDOWS = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glk",
        description="Training-free trajectory-prediction baselines and "
                    "ADE/FDE evaluation over trajectory datasets.")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="evaluate models over a scene")
    ev.add_argument("--config", help="config file (key=value sections)")
    ev.add_argument("--trajectories", help="trajectory table path")
    ev.add_argument("--lane-map", dest="lane_map", help="lane map path")
    ev.add_argument("--models", help=f"comma list from {', '.join(MODEL_NAMES)}")
    ev.add_argument("--horizon", type=float)
    ev.add_argument("--dt", type=float)
    ev.add_argument("--stride", type=float)
    ev.add_argument("--warmup-exclude", dest="warmup_exclude", type=float)
    ev.add_argument("--sigma-cv", dest="sigma_cv", type=float,
                    help="CV noise variance (all four components)")
    ev.add_argument("--sigma-ls", dest="sigma_ls", type=float,
                    help="lane-snapping noise variance")
    ev.add_argument("--seed", type=int)
    ev.add_argument("--workers", type=int)
    ev.add_argument("--out", help="output directory")

    pr = sub.add_parser("predict", help="export one agent's prediction")
    pr.add_argument("--config", required=True)
    pr.add_argument("--agent", required=True)
    pr.add_argument("--t0", type=float, required=True)
    pr.add_argument("--model", help="model to run (default: first configured)")
    pr.add_argument("--out", help="output csv (default under out_dir)")

    se = sub.add_parser("sorted-errors",
                        help="order windows by a reference model's ADE")
    se.add_argument("records", help="records.csv from a previous evaluate run")
    se.add_argument("--reference", required=True, help="reference model name")
    se.add_argument("--out", help="output csv (default next to records)")
    return parser


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = apply_overrides(cfg, args)
    if getattr(args, "trajectories", None):
        cfg.trajectories = args.trajectories
    if getattr(args, "lane_map", None):
        cfg.lane_map = args.lane_map
    if not cfg.trajectories or not cfg.lane_map:
        raise ConfigError("trajectories and lane_map paths are required "
                          "(config [paths] or --trajectories/--lane-map)")
    cfg.validate()
    return cfg


def _write_records(path: Path, records: list[ErrorRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent_id", "t0", "model", "ade", "fde", "mode"])
        for r in records:
            w.writerow([r.agent_id, repr(r.t0), r.model,
                        repr(r.ade), repr(r.fde), r.mode_index])


def _read_records(path: Path) -> list[ErrorRecord]:
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(ErrorRecord(agent_id=row["agent_id"],
                                       t0=float(row["t0"]),
                                       model=row["model"],
                                       ade=float(row["ade"]),
                                       fde=float(row["fde"]),
                                       mode_index=int(row["mode"])))
    if not records:
        raise DatasetError(f"{path}: no records")
    return records


def cmd_evaluate(args) -> int:
    cfg = _load_run_config(args)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    scene, stats = build_scene(cfg)
    print(f"loaded {stats.n_tracks} tracks ({stats.n_skipped_rows} rows "
          f"skipped), {stats.n_lanes} lanes", file=sys.stderr)
    noise = cfg.noise_config()
    print(f"noise variances: cv={noise.cv_var.tolist()} "
          f"ls={noise.ls_var.tolist()}", file=sys.stderr)

    records = evaluate_scene(scene, cfg)
    if not records:
        print("no evaluation windows: every track is shorter than "
              f"horizon ({cfg.horizon}s) plus warm-up exclusion "
              f"({cfg.warmup_exclude}s)", file=sys.stderr)
        return EXIT_NO_WINDOWS

    write_manifest(cfg, out_dir / "manifest.cfg")
    _write_records(out_dir / "records.csv", records)
    rows = summarize(records)
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "mean_ade", "mean_fde", "n_windows"])
        for s in rows:
            w.writerow([s.model, repr(s.mean_ade), repr(s.mean_fde),
                        s.n_windows])

    print(f"{'model':<10} {'mean ADE':>10} {'mean FDE':>10} {'windows':>8}")
    for s in rows:
        print(f"{s.model:<10} {s.mean_ade:>10.3f} {s.mean_fde:>10.3f} "
              f"{s.n_windows:>8d}")
    print(f"wrote {out_dir / 'records.csv'}", file=sys.stderr)
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = load_config(args.config)
    cfg.validate()
    model = args.model or cfg.models[0]
    if model not in MODEL_NAMES:
        raise ConfigError(f"unknown model {model!r}")

    scene, _ = build_scene(cfg)
    try:
        track = scene.track(args.agent)
    except KeyError:
        raise ConfigError(f"unknown agent {args.agent!r}") from None
    k0 = track.index_of(args.t0)
    if k0 is None:
        raise ConfigError(f"t0 {args.t0} outside track of agent {args.agent} "
                          f"(spans {track.t[0]:.3f}..{track.t[-1]:.3f}s on a "
                          f"{scene.dt_grid}s grid)")

    dt_steps = int(round(cfg.dt / scene.dt_grid))
    delta_theta = _heading_change(track, k0, dt_steps, cfg.min_speed)
    others = scene.states_at(args.t0, exclude=args.agent)
    ps = pf_state_at(scene, cfg, args.agent, args.t0)
    modes = predict_modeset(model, track.state_at(k0), scene, cfg,
                            delta_theta, others, ps,
                            args.t0 - float(track.t[0]))

    out = Path(args.out) if args.out else (
        Path(cfg.out_dir) / f"predict_{args.agent}_{args.t0:g}_{model}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "lane_id", "probability", "t",
                    "px", "py", "vx", "vy",
                    "var_px", "var_py", "var_vx", "var_vy"])
        for i, mode in enumerate(modes):
            lane = mode.lane_id if mode.lane_id is not None else ""
            tr = mode.trace
            for j in range(len(tr)):
                w.writerow([i, lane, repr(mode.probability),
                            repr(float(tr.times[j])),
                            *[repr(float(v)) for v in tr.means[j]],
                            *[repr(float(tr.covs[j][d, d])) for d in range(4)]])
    print(f"wrote {out} ({len(modes)} modes, model {model})", file=sys.stderr)
    return EXIT_OK


def cmd_sorted_errors(args) -> int:
    records = _read_records(Path(args.records))
    try:
        columns, rows = sorted_errors(records, args.reference)
    except KeyError as e:
        raise ConfigError(str(e)) from None
    out = Path(args.out) if args.out else (
        Path(args.records).parent / f"sorted_{args.reference}.csv")
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([row[0], row[1], repr(row[2]),
                        *[repr(v) for v in row[3:]]])
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"evaluate": cmd_evaluate,
               "predict": cmd_predict,
               "sorted-errors": cmd_sorted_errors}[args.command]
    try:
        return handler(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, LaneGeometryError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
