"""Robustness protocols, ablations, sensitivity sweeps, and the micro-bench.

Every protocol evaluates against clean targets; contamination and anchors
only change what the solver is allowed to see. Ablations share one trained
checkpoint and flip solver switches at test time, so differences are
attributable to the disabled component.
"""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass, field

import numpy as np

from .boundary import build_boundary, contaminate_prefix
from .chain import build_transfer_operator
from .config import RolloutConfig
from .data import Dataset
from .decoder import DecoderParams, init_params
from .memory import cold_start, update_memory
from .rollout import EvalReport, correct_window, rollout

CONTAMINATION_RATIOS = (0.0, 0.01, 0.05, 0.10, 0.20)
OUTLIER_MAGNITUDE = 6.0  # in units of the train-split per-channel std

ABLATION_VARIANTS = ("full", "local_only", "global_only", "no_bound", "no_memory")


def variant_config(config: RolloutConfig, variant: str) -> RolloutConfig:
    cfg = copy.deepcopy(config)
    s = cfg.solver
    s.local_only = s.global_only = s.no_bound = s.no_memory = False
    if variant == "local_only":
        s.local_only = True
    elif variant == "global_only":
        s.global_only = True
    elif variant == "no_bound":
        s.no_bound = True
    elif variant == "no_memory":
        s.no_memory = True
    elif variant != "full":
        raise ValueError(f"unknown ablation variant {variant!r}")
    return cfg


def run_ablation(
    backbone,
    dataset: Dataset,
    config: RolloutConfig,
    decoder_params: DecoderParams | None,
    variants: tuple[str, ...] = ABLATION_VARIANTS,
) -> dict[str, EvalReport]:
    """Evaluate test-time ablation variants from one shared checkpoint."""
    return {
        v: rollout(backbone, dataset, variant_config(config, v), decoder_params)
        for v in variants
    }


@dataclass
class ContaminationSummary:
    ratios: tuple[float, ...]
    reports: dict[float, EvalReport]
    degradation: float
    zero_shot_identical: bool

    def table(self) -> list[dict]:
        rows = []
        for r in self.ratios:
            agg = self.reports[r].aggregate()
            rows.append(
                {
                    "ratio": r,
                    "mse_base": agg["mse_base"],
                    "mse_corrected": agg["mse_corrected"],
                }
            )
        return rows


def run_contamination_grid(
    backbone,
    dataset: Dataset,
    config: RolloutConfig,
    decoder_params: DecoderParams | None,
    ratios: tuple[float, ...] = CONTAMINATION_RATIOS,
) -> ContaminationSummary:
    """One rollout per outlier ratio; degradation vs the clean-prefix run.

    Degradation is the mean over nonzero ratios of
    (mse_r - mse_clean) / mse_clean on the corrected forecasts.
    """
    sigma = dataset.train_std()
    reports = {
        r: rollout(
            backbone,
            dataset,
            config,
            decoder_params,
            contamination_ratio=r,
            contamination_sigma=sigma,
        )
        for r in ratios
    }
    clean = reports[min(ratios)].aggregate()["mse_corrected"]
    nonzero = [r for r in ratios if r > 0]
    degradation = float(
        np.mean([(reports[r].aggregate()["mse_corrected"] - clean) / clean for r in nonzero])
    )
    bases = [round(reports[r].aggregate()["mse_base"], 12) for r in ratios]
    return ContaminationSummary(
        ratios=tuple(ratios),
        reports=reports,
        degradation=degradation,
        zero_shot_identical=len(set(bases)) == 1,
    )


def run_sparse_boundary(
    backbone,
    dataset: Dataset,
    config: RolloutConfig,
    decoder_params: DecoderParams | None,
    k: int = 3,
    near_steps: tuple[int, int] = (4, 27),
    far_steps: tuple[int, int] = (73, 96),
) -> EvalReport:
    """Reveal only the first k future points; report near/far-field metrics.

    Step ranges are 1-indexed inclusive, matching the reporting convention
    (near 4:27, far 73:96 for a 96-step horizon).
    """
    if k >= config.horizon:
        raise ValueError(f"k={k} must be smaller than the horizon {config.horizon}")
    slices = {
        "near": slice(near_steps[0] - 1, near_steps[1]),
        "far": slice(far_steps[0] - 1, far_steps[1]),
    }
    return rollout(
        backbone,
        dataset,
        config,
        decoder_params,
        prefix_override=k,
        extra_slices=slices,
    )


def anchor_count(ratio: float, support: int = 36) -> int:
    """Number of true anchors inside the support window (2/4/7 for 5/10/20%)."""
    return int(round(ratio * support))


def run_sparse_anchor(
    backbone,
    dataset: Dataset,
    config: RolloutConfig,
    decoder_params: DecoderParams | None,
    ratio: float,
    support: int = 36,
    eval_steps: tuple[int, int] = (37, 60),
) -> EvalReport:
    """Sparse anchors in a predicted support window, evaluated beyond it.

    Within the first `support` predicted steps only round(ratio * support)
    positions are replaced by true observations; the rest keep the zero-shot
    prediction and contribute zero residual. Headline MSE is restricted to
    the 1-indexed inclusive `eval_steps` range.
    """
    return rollout(
        backbone,
        dataset,
        config,
        decoder_params,
        anchors=(support, anchor_count(ratio, support)),
        headline_slice=slice(eval_steps[0] - 1, eval_steps[1]),
    )


SWEEP_GRIDS = {
    "memory_decay": (0.0, 0.5, 0.8, 0.92, 0.98),
    "smoothness_alpha": (0.01, 0.05, 0.1, 0.5, 1.0, 5.0),
    "prefix": (1, 2, 3, 5, 7, "fft"),
}


def run_sweep(
    backbone,
    dataset: Dataset,
    config: RolloutConfig,
    decoder_params: DecoderParams | None,
    parameter: str,
    grid: tuple | None = None,
) -> list[dict]:
    """One rollout per grid point with a shared checkpoint; tidy rows out."""
    if parameter not in SWEEP_GRIDS:
        raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {list(SWEEP_GRIDS)}")
    points = grid if grid is not None else SWEEP_GRIDS[parameter]
    rows = []
    for value in points:
        cfg = copy.deepcopy(config)
        if parameter == "prefix":
            if value == "fft":
                cfg.prefix_mode = "fft"
                cfg.prefix_length = None
            else:
                cfg.prefix_mode = "fixed"
                cfg.prefix_length = int(value)
        else:
            setattr(cfg.solver, parameter, float(value))
        report = rollout(backbone, dataset, cfg, decoder_params)
        agg = report.aggregate()
        rows.append(
            {
                "parameter": parameter,
                "value": value,
                "mse_base": agg["mse_base"],
                "mse_corrected": agg["mse_corrected"],
                "mae_corrected": agg["mae_corrected"],
                "improvement": agg["improvement"],
            }
        )
    return rows


@dataclass
class BenchResult:
    horizon: int
    batch: int
    channels: int
    prefix: int
    repetitions: int
    ms_per_batch: float
    ms_per_batch_var: float
    ms_per_window: float
    windows_per_second: float
    decoder_parameters: int
    decoder_macs_per_window: int
    rows: list = field(default_factory=list)


def bench_latency(
    horizons: tuple[int, ...] = (96, 192, 336, 720),
    batch: int = 48,
    channels: int = 7,
    prefix: int = 4,
    repetitions: int = 10,
    config: RolloutConfig | None = None,
    seed: int = 0,
) -> list[BenchResult]:
    """Module-only latency: boundary build + local solve + decode + fuse +
    memory update over synthetic windows, excluding any backbone cost.

    Reports the median ms/batch over `repetitions` timed passes plus the
    decoder size. Parameter counts grow with the horizon because the decoder
    maps horizon-length fields.
    """
    base = config or RolloutConfig()
    rng = np.random.default_rng(seed)
    results = []
    for H in horizons:
        cfg = copy.deepcopy(base)
        cfg.horizon = H
        cfg.stride = H
        s = cfg.solver
        operator = build_transfer_operator(H, s.smoothness_alpha)
        params = init_params(
            horizon=H,
            context_size=s.context_size,
            hidden=s.hidden_dim,
            output_scale=s.global_scale,
            seed=seed,
        )
        forecasts = rng.standard_normal((batch, H, channels))
        observed = forecasts[:, :prefix, :] + 0.3 * rng.standard_normal((batch, prefix, channels))
        residuals = 0.3 * rng.standard_normal((batch, H, channels))

        times = []
        for _ in range(repetitions):
            memory = cold_start(H, channels, s.memory_decay, s.context_size)
            t0 = time.perf_counter()
            for b in range(batch):
                bnd = build_boundary(observed[b], forecasts[b], prefix)
                delta, _ = correct_window(
                    forecasts[b], bnd, memory, params, cfg, operator
                )
                memory = update_memory(memory, [residuals[b]])
            times.append((time.perf_counter() - t0) * 1000.0)
        med = float(np.median(times))
        results.append(
            BenchResult(
                horizon=H,
                batch=batch,
                channels=channels,
                prefix=prefix,
                repetitions=repetitions,
                ms_per_batch=med,
                ms_per_batch_var=float(np.var(times)),
                ms_per_window=med / batch,
                windows_per_second=1000.0 * batch / med if med > 0 else float("inf"),
                decoder_parameters=params.count(),
                decoder_macs_per_window=params.macs_per_channel() * channels,
            )
        )
    return results
