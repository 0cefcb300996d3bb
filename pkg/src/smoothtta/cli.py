"""Command-line interface.

Subcommands: fit-backbone, train-decoder, rollout, ablate, contaminate,
sparse-boundary, sparse-anchor, sweep, bench, dump-schedule. Exit codes:
0 success, 2 configuration error, 3 data error, 4 contract violation
(leakage or frozen-parameter breach). The SMOOTHTTA_DATA environment
variable supplies a directory against which relative --data paths resolve.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import backbones as bb
from . import decoder as dec
from .config import ConfigError, RolloutConfig, apply_overrides, load_config_file
from .data import DataError, load_csv, split_dataset
from .fusion import FusionSchedule, schedule_table
from .protocols import (
    CONTAMINATION_RATIOS,
    bench_latency,
    run_ablation,
    run_contamination_grid,
    run_sparse_anchor,
    run_sparse_boundary,
    run_sweep,
)
from .rollout import (
    ContractViolation,
    rollout,
    train_decoder_for,
    write_manifest,
    write_metrics_csv,
)

DATA_ENV = "SMOOTHTTA_DATA"


def _resolve_data(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    root = os.environ.get(DATA_ENV)
    if root and not p.is_absolute():
        candidate = Path(root) / p
        if candidate.exists():
            return candidate
    raise DataError(f"dataset {path!r} not found (also tried ${DATA_ENV})")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="CSV path (see SMOOTHTTA_DATA)")
    parser.add_argument("--policy", default="drop-row", choices=["drop-row", "forward-fill"])
    parser.add_argument("--split", default="standard", help="preset name or a:b:c ratios")
    parser.add_argument("--lookback", type=int, default=96)
    parser.add_argument("--horizon", type=int, default=96)
    parser.add_argument("--stride", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--prefix", default="fft", help="'fft' or a fixed length")
    parser.add_argument("--max-windows", type=int, default=None)
    parser.add_argument("--memory-schedule", default="safe", choices=["safe", "immediate"])
    parser.add_argument("--config", default=None, help="flat key = value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    parser.add_argument("--no-standardize", action="store_true")
    parser.add_argument("--normalize-backbone", action="store_true",
                        help="per-window normalization wrapper around the backbone")
    parser.add_argument("--backbone", default=None, help="fitted backbone parameter file")
    parser.add_argument("--decoder", default=None, help="trained decoder parameter file")
    parser.add_argument("--ridge", type=float, default=1e-3, help="backbone ridge strength")
    parser.add_argument("--local-only", action="store_true")
    parser.add_argument("--global-only", action="store_true")
    parser.add_argument("--no-bound", action="store_true")
    parser.add_argument("--no-memory", action="store_true")
    parser.add_argument("--out-dir", default="runs")


def _build_config(args) -> RolloutConfig:
    cfg = RolloutConfig(
        lookback=args.lookback,
        horizon=args.horizon,
        stride=args.stride,
        seed=args.seed,
        standardize=not args.no_standardize,
        memory_schedule=args.memory_schedule,
        max_windows=args.max_windows,
    )
    if args.prefix != "fft":
        cfg.prefix_mode = "fixed"
        try:
            cfg.prefix_length = int(args.prefix)
        except ValueError:
            raise ConfigError(f"--prefix must be 'fft' or an integer, got {args.prefix!r}")
    overrides = {}
    if args.config:
        overrides.update(load_config_file(args.config))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if overrides:
        apply_overrides(cfg, overrides)
    cfg.solver.local_only = args.local_only or cfg.solver.local_only
    cfg.solver.global_only = args.global_only or cfg.solver.global_only
    cfg.solver.no_bound = args.no_bound or cfg.solver.no_bound
    cfg.solver.no_memory = args.no_memory or cfg.solver.no_memory
    cfg.validate()
    return cfg


def _parse_split(spec: str):
    if ":" in spec:
        parts = [float(x) for x in spec.split(":")]
        if len(parts) != 3:
            raise ConfigError(f"--split ratios need three parts, got {spec!r}")
        return tuple(parts)
    return spec


def _load_dataset(args, cfg: RolloutConfig):
    ds = load_csv(_resolve_data(args.data), policy=args.policy)
    split_dataset(ds, _parse_split(args.split), min_span=cfg.lookback + cfg.horizon)
    if cfg.standardize:
        ds = ds.standardized()
    return ds


def _load_artifact(loader, path, what: str):
    try:
        return loader(path)
    except OSError as exc:
        raise DataError(f"cannot read {what} file {path!r}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"bad {what} file {path!r}: {exc}") from exc


def _prepare(args):
    """Dataset, frozen backbone, and (when needed) a trained decoder."""
    cfg = _build_config(args)
    ds = _load_dataset(args, cfg)
    if args.backbone:
        backbone = _load_artifact(bb.load_backbone, args.backbone, "backbone")
        if backbone.lookback != cfg.lookback or backbone.horizon != cfg.horizon:
            raise ConfigError(
                "backbone was fitted for "
                f"(L={backbone.lookback}, H={backbone.horizon}), run asks for "
                f"(L={cfg.lookback}, H={cfg.horizon})"
            )
    else:
        backbone = bb.fit_linear_backbone(ds.part("train"), cfg.lookback, cfg.horizon, args.ridge)
    if args.normalize_backbone:
        backbone = bb.NormalizationWrapper(backbone, enabled=True)

    decoder_params = None
    needs_decoder = not args.local_only and cfg.solver.effective_global_mix() > 0
    if needs_decoder:
        if args.decoder:
            decoder_params = _load_artifact(dec.load_params, args.decoder, "decoder")
        else:
            decoder_params, _ = train_decoder_for(backbone, ds, cfg)
    return cfg, ds, backbone, decoder_params


def _out_dir(args, name: str) -> Path:
    out = Path(args.out_dir) / name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def _write_rows(rows: list[dict], path: Path) -> None:
    if not rows:
        path.write_text("")
        return
    keys = list(rows[0].keys())
    lines = [",".join(keys)] + [",".join(_fmt(r[k]) for k in keys) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def cmd_fit_backbone(args) -> int:
    cfg = _build_config(args)
    ds = _load_dataset(args, cfg)
    backbone = bb.fit_linear_backbone(ds.part("train"), cfg.lookback, cfg.horizon, args.ridge)
    bb.save_backbone(backbone, args.out)
    print(f"fitted linear backbone (L={cfg.lookback}, H={cfg.horizon}, d={ds.channels}) -> {args.out}")
    return 0


def cmd_train_decoder(args) -> int:
    cfg, ds, backbone, _ = _prepare_no_decoder(args)
    params, trace = train_decoder_for(backbone, ds, cfg)
    dec.save_params(params, args.out, channels=ds.channels)
    print(f"trained decoder ({params.count()} parameters) -> {args.out}")
    print("loss trace: " + ", ".join(f"{x:.6f}" for x in trace))
    return 0


def _prepare_no_decoder(args):
    cfg = _build_config(args)
    ds = _load_dataset(args, cfg)
    if args.backbone:
        backbone = bb.load_backbone(args.backbone)
    else:
        backbone = bb.fit_linear_backbone(ds.part("train"), cfg.lookback, cfg.horizon, args.ridge)
    if args.normalize_backbone:
        backbone = bb.NormalizationWrapper(backbone, enabled=True)
    return cfg, ds, backbone, None


def cmd_rollout(args) -> int:
    cfg, ds, backbone, decoder_params = _prepare(args)
    report = rollout(backbone, ds, cfg, decoder_params)
    out = _out_dir(args, "rollout")
    write_metrics_csv(report, out / "metrics.csv")
    write_manifest(report, out / "manifest.json")
    agg = report.aggregate()
    print(json.dumps(report.summary(), indent=2, sort_keys=True))
    print(f"improvement over zero-shot: {agg.get('improvement', 0.0):+.2%}")
    return 0


def cmd_ablate(args) -> int:
    cfg, ds, backbone, decoder_params = _prepare(args)
    reports = run_ablation(backbone, ds, cfg, decoder_params)
    out = _out_dir(args, "ablate")
    summary = []
    for name, report in reports.items():
        write_metrics_csv(report, out / f"metrics_{name}.csv")
        agg = report.aggregate()
        summary.append({"variant": name, **{k: agg[k] for k in ("mse_base", "mse_corrected", "improvement")}})
    _write_rows(summary, out / "summary.csv")
    print(json.dumps(summary, indent=2))
    return 0


def _parse_ratios(spec: str) -> tuple[float, ...]:
    try:
        ratios = tuple(float(x) for x in spec.split(","))
    except ValueError:
        raise ConfigError(f"--ratios expects a comma list of numbers, got {spec!r}")
    if any(not 0.0 <= r <= 1.0 for r in ratios):
        raise ConfigError(f"ratios must lie in [0, 1], got {spec!r}")
    return ratios


def cmd_contaminate(args) -> int:
    cfg, ds, backbone, decoder_params = _prepare(args)
    ratios = _parse_ratios(args.ratios) if args.ratios else CONTAMINATION_RATIOS
    summary = run_contamination_grid(backbone, ds, cfg, decoder_params, ratios)
    out = _out_dir(args, "contaminate")
    rows = summary.table()
    for row in rows:
        row["degradation"] = summary.degradation
    _write_rows(rows, out / "contamination.csv")
    for r, rep in summary.reports.items():
        write_metrics_csv(rep, out / f"metrics_ratio_{r:g}.csv")
    print(json.dumps({"degradation": summary.degradation,
                      "zero_shot_identical": summary.zero_shot_identical,
                      "rows": rows}, indent=2))
    return 0


def _parse_steps(spec: str, horizon: int, what: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in spec.split(":"))
    except ValueError:
        raise ConfigError(f"--{what} expects LO:HI, got {spec!r}")
    if not 1 <= lo <= hi <= horizon:
        raise ConfigError(
            f"--{what} range {spec} does not fit inside the horizon {horizon}"
        )
    return lo, hi


def cmd_sparse_boundary(args) -> int:
    cfg, ds, backbone, decoder_params = _prepare(args)
    if not 0 <= args.k < cfg.horizon:
        raise ConfigError(f"--k {args.k} must lie in [0, horizon={cfg.horizon})")
    near = _parse_steps(args.near, cfg.horizon, "near")
    far = _parse_steps(args.far, cfg.horizon, "far")
    report = run_sparse_boundary(
        backbone, ds, cfg, decoder_params, k=args.k, near_steps=near, far_steps=far
    )
    out = _out_dir(args, "sparse-boundary")
    write_metrics_csv(report, out / "metrics.csv")
    write_manifest(report, out / "manifest.json")
    print(json.dumps(report.extra, indent=2, sort_keys=True))
    return 0


def cmd_sparse_anchor(args) -> int:
    cfg, ds, backbone, decoder_params = _prepare(args)
    if not 1 <= args.support < cfg.horizon:
        raise ConfigError(
            f"--support {args.support} must lie inside the horizon {cfg.horizon}"
        )
    eval_steps = _parse_steps(args.eval, cfg.horizon, "eval")
    ratios = _parse_ratios(args.ratios)
    out = _out_dir(args, "sparse-anchor")
    rows = []
    for r in ratios:
        report = run_sparse_anchor(
            backbone, ds, cfg, decoder_params,
            ratio=r, support=args.support, eval_steps=eval_steps,
        )
        write_metrics_csv(report, out / f"metrics_ratio_{r:g}.csv")
        agg = report.aggregate()
        rows.append({"ratio": r, "mse_base": agg["mse_base"],
                     "mse_corrected": agg["mse_corrected"],
                     "improvement": agg["improvement"]})
    _write_rows(rows, out / "summary.csv")
    print(json.dumps(rows, indent=2))
    return 0


def cmd_sweep(args) -> int:
    cfg, ds, backbone, decoder_params = _prepare(args)
    grid = tuple(args.grid.split(",")) if args.grid else None
    if grid and args.parameter != "prefix":
        grid = tuple(float(g) for g in grid)
    rows = run_sweep(backbone, ds, cfg, decoder_params, args.parameter, grid)
    out = _out_dir(args, "sweep")
    _write_rows(rows, out / "sweep.csv")
    print(json.dumps(rows, indent=2, default=str))
    return 0


def cmd_bench(args) -> int:
    horizons = tuple(int(x) for x in args.horizons.split(","))
    results = bench_latency(
        horizons=horizons,
        batch=args.batch,
        channels=args.channels,
        prefix=args.prefix_len,
        repetitions=args.reps,
        seed=args.seed,
    )
    rows = [
        {
            "horizon": r.horizon,
            "ms_per_batch": r.ms_per_batch,
            "ms_per_window": r.ms_per_window,
            "windows_per_second": r.windows_per_second,
            "variance": r.ms_per_batch_var,
            "decoder_parameters": r.decoder_parameters,
            "decoder_macs_per_window": r.decoder_macs_per_window,
        }
        for r in results
    ]
    out = Path(args.out_dir) / "bench"
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(rows, out / "bench.csv")
    print(json.dumps(rows, indent=2))
    return 0


def cmd_dump_schedule(args) -> int:
    schedule = FusionSchedule(
        global_mix=args.global_mix,
        ramp_sharpness=args.ramp_sharpness,
        ramp_midpoint=args.ramp_midpoint,
        correction_clip=args.clip,
    )
    rows = schedule_table(schedule, args.horizon)
    _write_rows(rows, Path(args.out))
    print(
        f"wrote {len(rows)} steps (transition at step {schedule.transition_step(args.horizon)}) -> {args.out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smoothtta",
        description="Prefix-boundary test-time correction for frozen forecasters",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-backbone", help="ridge-fit the frozen linear backbone")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_backbone)

    p = sub.add_parser("train-decoder", help="train the global decoder offline")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_decoder)

    p = sub.add_parser("rollout", help="delayed-revelation evaluation rollout")
    _add_common(p)
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("ablate", help="shared-checkpoint test-time ablations")
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("contaminate", help="prefix-outlier robustness grid")
    _add_common(p)
    p.add_argument("--ratios", default=None, help="comma list, default 0,0.01,0.05,0.1,0.2")
    p.set_defaults(func=cmd_contaminate)

    p = sub.add_parser("sparse-boundary", help="k revealed points, near/far fields")
    _add_common(p)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--near", default="4:27", help="1-indexed inclusive near-field steps")
    p.add_argument("--far", default="73:96", help="1-indexed inclusive far-field steps")
    p.set_defaults(func=cmd_sparse_boundary)

    p = sub.add_parser("sparse-anchor", help="sparse anchors in a support window")
    _add_common(p)
    p.add_argument("--ratios", default="0.05,0.10,0.20")
    p.add_argument("--support", type=int, default=36, help="support window length")
    p.add_argument("--eval", default="37:60", help="1-indexed inclusive eval steps")
    p.set_defaults(func=cmd_sparse_anchor)

    p = sub.add_parser("sweep", help="sensitivity sweep over one parameter")
    _add_common(p)
    p.add_argument("--parameter", required=True,
                   choices=["memory_decay", "smoothness_alpha", "prefix"])
    p.add_argument("--grid", default=None, help="comma list overriding the default grid")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="module-only latency micro-benchmark")
    p.add_argument("--horizons", default="96,192,336,720")
    p.add_argument("--batch", type=int, default=48)
    p.add_argument("--channels", type=int, default=7)
    p.add_argument("--prefix-len", type=int, default=4)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="runs")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("dump-schedule", help="fusion ramp and share table as CSV")
    p.add_argument("--horizon", type=int, default=96)
    p.add_argument("--global-mix", type=float, default=0.7)
    p.add_argument("--ramp-sharpness", type=float, default=8.0)
    p.add_argument("--ramp-midpoint", type=float, default=0.25)
    p.add_argument("--clip", type=float, default=2.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump_schedule)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
