"""Sequential delayed-revelation rollout over a test split.

Windows are corrected in chronological order. For each one the frozen
backbone predicts, the revealed prefix builds the boundary, the local branch
propagates it, the global decoder reads the pre-window memory snapshot, and
the fused bounded correction is applied. Only after a window's entire target
horizon has elapsed is its residual folded into the error memory; a guard
tracks the largest target index the memory has consumed and hard-fails if
any window would be corrected with a memory that already saw its targets.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .backbones import NormalizationWrapper
from .boundary import (
    PrefixBoundary,
    anchor_boundary,
    build_boundary,
    contaminate_prefix,
    empty_boundary,
    estimate_dominant_period,
    select_prefix_length,
)
from .chain import build_transfer_operator
from .config import RolloutConfig
from .data import DataError, Dataset
from .decoder import DecoderParams, TrainConfig, build_features, decode, init_params, train_decoder
from .fusion import FusionSchedule, apply_correction, fuse, global_gate
from .local import solve_local
from .memory import MemoryState, cold_start, context_vector, update_memory


class ContractViolation(RuntimeError):
    """Leakage or frozen-parameter breach (CLI exit code 4)."""


@dataclass
class EvalReport:
    dataset: str
    backbone: str
    manifest: dict
    rows: list[dict]
    n_flagged: int = 0
    timing: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def n_windows(self) -> int:
        return len(self.rows)

    def aggregate(self, skip: int = 0) -> dict:
        return aggregate_rows(self.rows, skip=skip)

    def summary(self) -> dict:
        agg = self.aggregate()
        out = {
            "dataset": self.dataset,
            "backbone": self.backbone,
            "n_windows": self.n_windows,
            "n_flagged": self.n_flagged,
            **agg,
            **self.extra,
        }
        return out


def aggregate_rows(rows: list[dict], skip: int = 0, prefix: str = "") -> dict:
    """Mean window metrics, optionally skipping the first warm-up windows."""
    used = rows[skip:]
    if not used:
        return {}
    keys = [k for k in used[0] if k.startswith(prefix) and k.endswith(("_base", "_corrected"))]
    agg = {k: float(np.mean([r[k] for r in used])) for k in keys}
    base = agg.get(prefix + "mse_base")
    corr = agg.get(prefix + "mse_corrected")
    if base is not None and corr is not None and base > 0:
        agg[prefix + "improvement"] = (base - corr) / base
    return agg


def _solver_schedule(config: RolloutConfig) -> FusionSchedule:
    s = config.solver
    return FusionSchedule(
        global_mix=s.effective_global_mix(),
        ramp_sharpness=s.ramp_sharpness,
        ramp_midpoint=s.ramp_midpoint,
        correction_clip=s.effective_clip(),
    )


def correct_window(
    forecast: np.ndarray,
    boundary: PrefixBoundary,
    memory: MemoryState,
    decoder_params: DecoderParams | None,
    config: RolloutConfig,
    operator=None,
) -> tuple[np.ndarray, dict]:
    """One window's correction field and diagnostics, given its boundary."""
    s = config.solver
    horizon, d = forecast.shape
    schedule = _solver_schedule(config)
    if boundary.is_empty():
        delta = np.zeros_like(forecast)
        return delta, {"local": delta, "global": delta}
    if operator is None:
        operator = build_transfer_operator(horizon, s.smoothness_alpha)

    if s.global_only:
        local_field = np.zeros_like(forecast)
    else:
        local_field = solve_local(
            boundary.prefix_error,
            operator,
            ridge_coef=s.ridge_coef,
            coef_clip=s.basis_clip,
            response_mix=s.local_mix,
        ).combined

    mem = cold_start(horizon, d, s.memory_decay, s.context_size) if s.no_memory else memory
    if schedule.global_mix > 0 and decoder_params is not None:
        global_field = decode(
            decoder_params,
            forecast,
            local_field,
            boundary.padded_error,
            boundary.mask,
            mem.template,
            context_vector(mem),
        )
    else:
        global_field = np.zeros_like(forecast)

    delta = fuse(local_field, global_field, schedule)
    return delta, {"local": local_field, "global": global_field}


def _window_starts(dataset: Dataset, config: RolloutConfig, part: str = "test") -> list[int]:
    lo, hi = dataset.range_of(part)
    L, H = config.lookback, config.horizon
    if hi - lo < L + H:
        raise DataError(
            f"{part} split has {hi - lo} points, needs at least lookback + horizon = {L + H}"
        )
    starts = list(range(lo + L, hi - H + 1, config.effective_stride))
    if config.max_windows is not None:
        starts = starts[: config.max_windows]
    return starts


def _select_prefix(X: np.ndarray, config: RolloutConfig, override: int | None) -> int:
    s = config.solver
    if override is not None:
        revealed = override
        period = override if override > 0 else s.min_prefix_support
    elif config.prefix_mode == "fixed":
        revealed = period = config.prefix_length
    else:
        period = estimate_dominant_period(X, fallback=s.min_prefix_support)
        revealed = period  # delayed-revelation budget equals the period estimate
    return select_prefix_length(period, revealed, config.horizon, s.min_prefix_support)


def _metrics(Y: np.ndarray, base: np.ndarray, corrected: np.ndarray, sl: slice) -> dict:
    err_b = Y[sl] - base[sl]
    err_c = Y[sl] - corrected[sl]
    return {
        "mse_base": float(np.mean(err_b**2)),
        "mse_corrected": float(np.mean(err_c**2)),
        "mae_base": float(np.mean(np.abs(err_b))),
        "mae_corrected": float(np.mean(np.abs(err_c))),
    }


def rollout(
    backbone,
    dataset: Dataset,
    config: RolloutConfig,
    decoder_params: DecoderParams | None = None,
    part: str = "test",
    prefix_override: int | None = None,
    contamination_ratio: float = 0.0,
    contamination_sigma: np.ndarray | None = None,
    anchors: tuple[int, int] | None = None,
    headline_slice: slice | None = None,
    extra_slices: dict[str, slice] | None = None,
) -> EvalReport:
    """Run the delayed-revelation loop and collect per-window metrics.

    Protocol hooks: `prefix_override` forces the revealed budget,
    `contamination_ratio` corrupts the visible prefix at +-6 sigma,
    `anchors=(support, count)` switches to sparse-anchor boundaries,
    `headline_slice` restricts the headline metrics to a step range and
    `extra_slices` adds named step-range metrics (near/far fields).
    All metrics are computed against clean targets.
    """
    config.validate()
    values = dataset.values
    H, L = config.horizon, config.lookback
    d = dataset.channels
    s = config.solver
    operator = build_transfer_operator(H, s.smoothness_alpha)
    starts = _window_starts(dataset, config, part)

    backbone_digest = backbone.param_digest()
    decoder_digest = decoder_params.digest() if decoder_params is not None else None

    memory = cold_start(H, d, s.memory_decay, s.context_size)
    pending: list[tuple[int, np.ndarray]] = []
    max_consumed = -1  # largest target index the memory has seen
    sigma = (
        contamination_sigma
        if contamination_sigma is not None
        else dataset.train_std()
    )
    head = headline_slice if headline_slice is not None else slice(0, H)

    rows: list[dict] = []
    n_flagged = 0
    t0 = time.perf_counter()
    for i, t in enumerate(starts):
        if config.memory_schedule == "safe":
            ready = [(tj, r) for tj, r in pending if tj + H <= t]
            pending = [(tj, r) for tj, r in pending if tj + H > t]
            for tj, res in ready:
                memory = update_memory(memory, [res])
                max_consumed = max(max_consumed, tj + H - 1)
        if max_consumed >= t:
            raise ContractViolation(
                f"memory already consumed target index {max_consumed} but window "
                f"{i} starts at {t}: correction would leak its own targets"
            )

        X = values[t - L : t]
        forecast = backbone.predict(X, start=t)
        Y = values[t : t + H]
        if not np.all(np.isfinite(forecast)):
            n_flagged += 1
            continue

        if anchors is not None:
            support, count = anchors
            if count == 0:
                bnd = empty_boundary(H, d)  # nothing revealed: zero-shot window
            else:
                rng = np.random.default_rng([config.seed, 104729, i])
                positions = rng.choice(support, size=count, replace=False)
                bnd = anchor_boundary(Y[:support], forecast, support, positions)
        else:
            a = _select_prefix(X, config, prefix_override)
            bnd = (
                build_boundary(Y[:a], forecast, a)
                if a > 0
                else empty_boundary(H, d)
            )
            if contamination_ratio > 0 and not bnd.is_empty():
                bnd = contaminate_prefix(
                    bnd,
                    forecast,
                    contamination_ratio,
                    sigma,
                    rng_seed=int(np.random.default_rng([config.seed, 15485863, i]).integers(2**31)),
                )

        delta, _ = correct_window(forecast, bnd, memory, decoder_params, config, operator)
        corrected = apply_correction(forecast, delta)

        row = {
            "window": i,
            "start": t,
            "prefix_length": bnd.length,
            "memory_version": memory.updates,
            **_metrics(Y, forecast, corrected, head),
        }
        for name, sl in (extra_slices or {}).items():
            for k, v in _metrics(Y, forecast, corrected, sl).items():
                row[f"{name}_{k}"] = v
        rows.append(row)

        residual = Y - forecast  # clean targets only; protocols never touch these
        pending.append((t, residual))
        if config.memory_schedule == "immediate":
            memory = update_memory(memory, [residual])
            max_consumed = max(max_consumed, t + H - 1)
            pending.pop()

    elapsed = time.perf_counter() - t0
    if backbone.param_digest() != backbone_digest:
        raise ContractViolation("backbone parameters changed during rollout")
    if decoder_params is not None and decoder_params.digest() != decoder_digest:
        raise ContractViolation("decoder parameters changed during rollout")

    report = EvalReport(
        dataset=dataset.name,
        backbone=getattr(backbone, "kind", type(backbone).__name__),
        manifest=config.manifest(),
        rows=rows,
        n_flagged=n_flagged,
        timing={"rollout_seconds": elapsed, "windows": len(rows)},
    )
    report.extra = report.aggregate()
    for name in (extra_slices or {}):
        report.extra.update(aggregate_rows(rows, prefix=f"{name}_"))
    return report


def build_decoder_training_set(
    backbone,
    dataset: Dataset,
    config: RolloutConfig,
    part: str = "val",
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-channel decoder samples from a simulated rollout.

    Replays the deployment pipeline (prefix selection, local solve, safe
    memory schedule) over fully observed windows, emitting one feature row
    per (window, channel) with the full residual as regression target.
    Returns (features, targets, local_fields, gate).
    """
    config.validate()
    values = dataset.values
    H, L = config.horizon, config.lookback
    d = dataset.channels
    s = config.solver
    operator = build_transfer_operator(H, s.smoothness_alpha)
    starts = _window_starts(dataset, config, part)
    gate = global_gate(
        FusionSchedule(
            global_mix=s.global_mix,
            ramp_sharpness=s.ramp_sharpness,
            ramp_midpoint=s.ramp_midpoint,
            correction_clip=s.correction_clip,
        ),
        H,
    )

    memory = cold_start(H, d, s.memory_decay, s.context_size)
    pending: list[tuple[int, np.ndarray]] = []
    feats, targets, locals_ = [], [], []
    for t in starts:
        ready = [(tj, r) for tj, r in pending if tj + H <= t]
        pending = [(tj, r) for tj, r in pending if tj + H > t]
        for _, res in ready:
            memory = update_memory(memory, [res])

        X = values[t - L : t]
        forecast = backbone.predict(X, start=t)
        if not np.all(np.isfinite(forecast)):
            continue
        Y = values[t : t + H]
        a = _select_prefix(X, config, None)
        bnd = build_boundary(Y[:a], forecast, a) if a > 0 else empty_boundary(H, d)
        local_field = (
            solve_local(
                bnd.prefix_error,
                operator,
                ridge_coef=s.ridge_coef,
                coef_clip=s.basis_clip,
                response_mix=s.local_mix,
            ).combined
            if not bnd.is_empty()
            else np.zeros_like(forecast)
        )
        residual = Y - forecast
        feats.append(
            build_features(
                forecast,
                local_field,
                bnd.padded_error,
                bnd.mask,
                memory.template,
                context_vector(memory),
            )
        )
        targets.append(residual.T)
        locals_.append(local_field.T)
        pending.append((t, residual))

    if not feats:
        raise DataError(f"no usable windows in the {part} split")
    return (
        np.vstack(feats),
        np.vstack(targets),
        np.vstack(locals_),
        gate,
    )


def train_decoder_for(
    backbone,
    dataset: Dataset,
    config: RolloutConfig,
    part: str = "val",
    train_config: TrainConfig | None = None,
) -> tuple[DecoderParams, list[float]]:
    """Initialize and fit a decoder from simulated rollouts over one split."""
    feats, targets, locals_, gate = build_decoder_training_set(
        backbone, dataset, config, part
    )
    params = init_params(
        horizon=config.horizon,
        context_size=config.solver.context_size,
        hidden=config.solver.hidden_dim,
        output_scale=config.solver.global_scale,
        seed=config.seed,
    )
    cfg = train_config or TrainConfig(seed=config.seed)
    return train_decoder(params, feats, targets, locals_, gate, cfg)


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(float(v))  # plain-float repr even for numpy scalars
    return str(v)


def write_metrics_csv(report: EvalReport, path) -> None:
    """Per-window metric rows; full-precision floats, byte-stable given a seed."""
    if not report.rows:
        with open(path, "w") as fh:
            fh.write("")
        return
    keys = list(report.rows[0].keys())
    lines = [",".join(keys)]
    for row in report.rows:
        lines.append(",".join(_format_value(row[k]) for k in keys))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_manifest(report: EvalReport, path) -> None:
    payload = {
        "dataset": report.dataset,
        "backbone": report.backbone,
        "config": report.manifest,
        "n_windows": report.n_windows,
        "n_flagged": report.n_flagged,
        "aggregates": report.extra,
        "timing": report.timing,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def wrap_backbone(backbone, normalize: bool) -> NormalizationWrapper:
    return NormalizationWrapper(backbone, enabled=normalize)
