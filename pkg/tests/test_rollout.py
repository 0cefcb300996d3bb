import copy

import numpy as np
import pytest

from smoothtta.backbones import BiasedOracleForecaster
from smoothtta.config import RolloutConfig, SolverConfig
from smoothtta.rollout import (
    ContractViolation,
    build_decoder_training_set,
    rollout,
    train_decoder_for,
    write_manifest,
    write_metrics_csv,
)
from smoothtta.synth import biased_oracle_fixture


@pytest.fixture(scope="module")
def small_fixture():
    return biased_oracle_fixture(
        horizon=16, lookback=32, channels=2, n_test_windows=25, period=8, seed=11
    )


def test_identity_when_both_branches_disabled(small_fixture):
    fx = small_fixture
    cfg = copy.deepcopy(fx.config)
    cfg.solver.local_only = True
    cfg.solver.global_only = True
    report = rollout(fx.backbone, fx.dataset, cfg, None)
    for row in report.rows:
        assert row["mse_corrected"] == row["mse_base"]
        assert row["mae_corrected"] == row["mae_base"]


def test_local_branch_improves_on_biased_oracle(small_fixture):
    fx = small_fixture
    cfg = copy.deepcopy(fx.config)
    cfg.solver.local_only = True
    report = rollout(fx.backbone, fx.dataset, cfg, None)
    agg = report.aggregate()
    assert agg["mse_corrected"] < agg["mse_base"]


def test_memory_version_advances_safely(small_fixture):
    fx = small_fixture
    report = rollout(fx.backbone, fx.dataset, fx.config, None)
    # with non-overlapping windows every prior window is folded before the
    # next correction, so the snapshot version equals the window index
    for row in report.rows:
        assert row["memory_version"] == row["window"]


def test_leakage_guard_fires_on_misscheduled_update(small_fixture):
    fx = small_fixture
    cfg = copy.deepcopy(fx.config)
    cfg.stride = 4                      # overlapping windows
    cfg.memory_schedule = "immediate"   # fold each window before it has elapsed
    with pytest.raises(ContractViolation, match="leak"):
        rollout(fx.backbone, fx.dataset, cfg, None)


def test_overlapping_windows_are_safe_with_default_schedule(small_fixture):
    fx = small_fixture
    cfg = copy.deepcopy(fx.config)
    cfg.stride = 4
    cfg.max_windows = 30
    report = rollout(fx.backbone, fx.dataset, cfg, None)
    assert report.n_windows == 30
    # with stride 4 and horizon 16, window j is fully revealed before window i
    # exactly when j <= i - 4, so the snapshot version is exactly max(0, i - 3)
    for row in report.rows:
        assert row["memory_version"] == max(0, row["window"] - 3)


def test_rollout_is_deterministic(small_fixture):
    fx = small_fixture
    one = rollout(fx.backbone, fx.dataset, fx.config, None)
    two = rollout(fx.backbone, fx.dataset, fx.config, None)
    assert one.rows == two.rows


def test_flagged_nan_window_is_excluded(small_fixture):
    fx = small_fixture

    class Flaky:
        kind = "flaky"
        lookback = fx.backbone.lookback
        horizon = fx.backbone.horizon
        channels = fx.backbone.channels

        def __init__(self, inner):
            self.inner = inner
            self.calls = 0

        def predict(self, X, start=None):
            self.calls += 1
            out = self.inner.predict(X, start=start)
            if self.calls == 3:
                out = out.copy()
                out[0, 0] = np.nan
            return out

        def param_digest(self):
            return self.inner.param_digest()

    flaky = Flaky(fx.backbone)
    report = rollout(flaky, fx.dataset, fx.config, None)
    assert report.n_flagged == 1
    assert report.n_windows == 25 - 1


def test_frozen_backbone_contract(small_fixture):
    fx = small_fixture

    class Drifting:
        kind = "drifting"
        lookback = fx.backbone.lookback
        horizon = fx.backbone.horizon
        channels = fx.backbone.channels

        def __init__(self):
            self.w = 0.0

        def predict(self, X, start=None):
            self.w += 1.0  # illegal online update
            return np.zeros((self.horizon, self.channels))

        def param_digest(self):
            return str(self.w)

    with pytest.raises(ContractViolation, match="backbone"):
        rollout(Drifting(), fx.dataset, fx.config, None)


def test_zero_prefix_override_reduces_to_zero_shot(small_fixture):
    fx = small_fixture
    report = rollout(fx.backbone, fx.dataset, fx.config, None, prefix_override=0)
    for row in report.rows:
        assert row["prefix_length"] == 0
        assert row["mse_corrected"] == row["mse_base"]


def test_fixed_prefix_mode(small_fixture):
    fx = small_fixture
    cfg = copy.deepcopy(fx.config)
    cfg.prefix_mode = "fixed"
    cfg.prefix_length = 5
    report = rollout(fx.backbone, fx.dataset, cfg, None)
    assert all(row["prefix_length"] == 5 for row in report.rows)


def test_training_set_shapes(small_fixture):
    fx = small_fixture
    feats, targets, locals_, gate = build_decoder_training_set(
        fx.backbone, fx.dataset, fx.config
    )
    H = fx.config.horizon
    K = fx.config.solver.context_size
    assert feats.shape[1] == 5 * H + 2 * K
    assert targets.shape == (feats.shape[0], H)
    assert locals_.shape == targets.shape
    assert gate.shape == (H,)
    assert feats.shape[0] % fx.dataset.channels == 0


def test_trained_decoder_improves_over_local_only(small_fixture):
    fx = small_fixture
    params, trace = train_decoder_for(fx.backbone, fx.dataset, fx.config)
    assert trace[-1] <= trace[0]
    full = rollout(fx.backbone, fx.dataset, fx.config, params).aggregate()
    cfg_local = copy.deepcopy(fx.config)
    cfg_local.solver.local_only = True
    local = rollout(fx.backbone, fx.dataset, cfg_local, params).aggregate()
    assert full["mse_corrected"] < local["mse_corrected"]
    assert full["improvement"] > local["improvement"]


def test_metrics_csv_and_manifest_round(small_fixture, tmp_path):
    fx = small_fixture
    report = rollout(fx.backbone, fx.dataset, fx.config, None)
    csv_path = tmp_path / "metrics.csv"
    write_metrics_csv(report, csv_path)
    first = csv_path.read_bytes()
    write_metrics_csv(rollout(fx.backbone, fx.dataset, fx.config, None), csv_path)
    assert csv_path.read_bytes() == first  # byte-identical given the same seed

    manifest_path = tmp_path / "manifest.json"
    write_manifest(report, manifest_path)
    import json

    payload = json.loads(manifest_path.read_text())
    assert payload["config"]["solver"]["correction_clip"] == 2.5
    assert payload["config"]["correction_units"] == "raw"
    assert "timing" in payload


def test_manifest_records_ablation_clip():
    cfg = RolloutConfig(solver=SolverConfig(no_bound=True))
    assert cfg.manifest()["solver"]["effective_clip"] == "inf"


def test_correction_gain_persists_under_both_normalization_modes():
    # a regime shift after the training split leaves the frozen linear
    # backbone with systematic error; per-window normalization absorbs part
    # of it, and the correction must still improve the remainder in both modes
    from smoothtta.backbones import NormalizationWrapper, fit_linear_backbone
    from smoothtta.data import Dataset, split_dataset

    rng = np.random.default_rng(21)
    T, d, period = 3000, 2, 24
    t = np.arange(T)[:, None]
    drift = np.clip((t - 0.6 * T) / (0.4 * T), 0, None)
    values = (
        np.sin(2 * np.pi * t / period + rng.uniform(0, 2 * np.pi, d) + 2.0 * drift)
        + 0.8 * drift
        + 0.1 * rng.standard_normal((T, d))
    )
    ds = Dataset("shifted", values, [f"c{i}" for i in range(d)])
    split_dataset(ds, "ett", min_span=96)
    ds = ds.standardized()
    config = RolloutConfig(lookback=48, horizon=48, seed=1)
    inner = fit_linear_backbone(ds.part("train"), 48, 48, 1e-3)

    improvements = {}
    for enabled in (False, True):
        backbone = NormalizationWrapper(inner, enabled=enabled)
        params, _ = train_decoder_for(backbone, ds, config)
        improvements[enabled] = rollout(backbone, ds, config, params).aggregate()[
            "improvement"
        ]
    assert improvements[False] > 0
    assert improvements[True] > 0


def test_oracle_residual_matches_construction(small_fixture):
    # the fixture's own contract: residual = noise - bias, so zero-shot MSE
    # must sit near bias^2 + noise_floor
    fx = small_fixture
    report = rollout(fx.backbone, fx.dataset, fx.config, None)
    agg = report.aggregate()
    bias = 0.3
    assert agg["mse_base"] == pytest.approx(bias**2, rel=0.6)
