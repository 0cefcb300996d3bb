"""Frozen forecasting backbones behind a single predict interface.

The correction solver never looks inside a backbone; it only needs a frozen
(L, d) -> (H, d) map. Provided here: a closed-form linear (ridge) forecaster
fit offline on sliding windows, two naive baselines, a biased oracle fixture
whose residual field is known by construction, and a per-window normalization
wrapper. All parameters are immutable after fitting; a digest over the
parameter block lets the harness verify nothing moved during a rollout.
"""

from __future__ import annotations

import hashlib

import numpy as np

from . import paramio


class FitError(RuntimeError):
    """Insufficient data to fit the requested backbone."""


def _digest_arrays(*arrays: np.ndarray) -> str:
    md = hashlib.sha256()
    for arr in arrays:
        md.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    return md.hexdigest()


class LinearForecaster:
    """Direct multi-step linear map per channel, ridge-fit with intercept.

    For each channel the full horizon is regressed on the lookback at once
    (one (L, H) weight block per channel), so prediction is a single matrix
    product. The intercept is left unpenalized by centering.
    """

    kind = "linear"

    def __init__(self, lookback: int, horizon: int, weights: np.ndarray, intercepts: np.ndarray):
        # weights (d, L, H); intercepts (d, H)
        self.lookback = lookback
        self.horizon = horizon
        self.weights = np.asarray(weights, dtype=float)
        self.intercepts = np.asarray(intercepts, dtype=float)
        self.channels = self.weights.shape[0]
        self.weights.flags.writeable = False
        self.intercepts.flags.writeable = False

    def predict(self, X: np.ndarray, start: int | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape != (self.lookback, self.channels):
            raise ValueError(
                f"lookback shape {X.shape}, fitted for {(self.lookback, self.channels)}"
            )
        out = np.empty((self.horizon, self.channels))
        for c in range(self.channels):
            out[:, c] = X[:, c] @ self.weights[c] + self.intercepts[c]
        return out

    def param_digest(self) -> str:
        return _digest_arrays(self.weights, self.intercepts)


def fit_linear_backbone(
    train_series: np.ndarray, lookback: int, horizon: int, ridge_strength: float = 1e-3
) -> LinearForecaster:
    """Ridge-fit the lookback-to-horizon map over every sliding train window."""
    Y = np.asarray(train_series, dtype=float)
    T, d = Y.shape
    n_windows = T - lookback - horizon + 1
    if n_windows < 1:
        raise FitError(
            f"need at least lookback + horizon = {lookback + horizon} points, got {T}"
        )
    weights = np.empty((d, lookback, horizon))
    intercepts = np.empty((d, horizon))
    starts = np.arange(n_windows)
    for c in range(d):
        col = Y[:, c]
        X = np.lib.stride_tricks.sliding_window_view(col, lookback)[starts]
        targets = np.lib.stride_tricks.sliding_window_view(col, horizon)[starts + lookback]
        x_mean = X.mean(axis=0)
        t_mean = targets.mean(axis=0)
        Xc = X - x_mean
        Tc = targets - t_mean
        G = Xc.T @ Xc + ridge_strength * np.eye(lookback)
        W = np.linalg.solve(G, Xc.T @ Tc)
        weights[c] = W
        intercepts[c] = t_mean - x_mean @ W
    return LinearForecaster(lookback, horizon, weights, intercepts)


class NaiveLastForecaster:
    """Repeats the final lookback row across the horizon."""

    kind = "naive-last"

    def __init__(self, lookback: int, horizon: int, channels: int):
        self.lookback = lookback
        self.horizon = horizon
        self.channels = channels

    def predict(self, X: np.ndarray, start: int | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.tile(X[-1], (self.horizon, 1))

    def param_digest(self) -> str:
        return _digest_arrays(np.array([self.lookback, self.horizon, self.channels], float))


class SeasonalNaiveForecaster:
    """Repeats the last full period of the lookback across the horizon."""

    kind = "seasonal-naive"

    def __init__(self, lookback: int, horizon: int, channels: int, period: int):
        if period < 1 or period > lookback:
            raise ValueError(f"period {period} outside [1, lookback={lookback}]")
        self.lookback = lookback
        self.horizon = horizon
        self.channels = channels
        self.period = period

    def predict(self, X: np.ndarray, start: int | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        cycle = X[-self.period:]
        reps = -(-self.horizon // self.period)
        return np.tile(cycle, (reps, 1))[: self.horizon]

    def param_digest(self) -> str:
        return _digest_arrays(
            np.array([self.lookback, self.horizon, self.channels, self.period], float)
        )


class BiasedOracleForecaster:
    """Test fixture: the reference trajectory plus a fixed bias field.

    Constructed from a reference series (e.g. the clean component of a
    synthetic stream, or the dataset itself); predictions read the reference
    at the window position, so the residual field is known analytically.
    Needs the window's first target index via `start`.
    """

    kind = "oracle-with-bias"

    def __init__(self, reference: np.ndarray, lookback: int, horizon: int, bias: np.ndarray):
        self.reference = np.asarray(reference, dtype=float)
        self.lookback = lookback
        self.horizon = horizon
        self.channels = self.reference.shape[1]
        bias = np.asarray(bias, dtype=float)
        self.bias = np.broadcast_to(bias, (horizon, self.channels)).copy()
        self.reference.flags.writeable = False
        self.bias.flags.writeable = False

    def predict(self, X: np.ndarray, start: int | None = None) -> np.ndarray:
        if start is None:
            raise ValueError("oracle backbone needs the window start index")
        if start + self.horizon > self.reference.shape[0]:
            raise ValueError("window extends past the oracle reference series")
        return self.reference[start : start + self.horizon] + self.bias

    def param_digest(self) -> str:
        return _digest_arrays(self.bias)


class NormalizationWrapper:
    """Per-window standardize/de-standardize shell around a backbone.

    When enabled, the lookback's per-channel mean/std standardize the input
    and exactly invert on the output (std floored at 1e-8 for flat
    channels). Disabled, it is the identity around the inner forecaster.
    """

    STD_FLOOR = 1e-8

    def __init__(self, inner, enabled: bool = True):
        self.inner = inner
        self.enabled = enabled
        self.kind = f"norm({inner.kind})" if enabled else inner.kind

    @property
    def lookback(self):
        return self.inner.lookback

    @property
    def horizon(self):
        return self.inner.horizon

    @property
    def channels(self):
        return self.inner.channels

    def predict(self, X: np.ndarray, start: int | None = None) -> np.ndarray:
        if not self.enabled:
            return self.inner.predict(X, start=start)
        X = np.asarray(X, dtype=float)
        mu = X.mean(axis=0)
        sd = np.maximum(X.std(axis=0), self.STD_FLOOR)
        inner_out = self.inner.predict((X - mu) / sd, start=start)
        return inner_out * sd + mu

    def param_digest(self) -> str:
        return self.inner.param_digest()


def save_backbone(forecaster: LinearForecaster, path) -> None:
    header = {
        "kind": forecaster.kind,
        "lookback": forecaster.lookback,
        "horizon": forecaster.horizon,
        "channels": forecaster.channels,
    }
    paramio.save_blocks(
        path, header, {"weights": forecaster.weights, "intercepts": forecaster.intercepts}
    )


def load_backbone(path) -> LinearForecaster:
    header, blocks = paramio.load_blocks(path)
    if header.get("kind") != "linear":
        raise ValueError(f"unsupported backbone kind {header.get('kind')!r}")
    return LinearForecaster(
        lookback=int(header["lookback"]),
        horizon=int(header["horizon"]),
        weights=blocks["weights"],
        intercepts=blocks["intercepts"],
    )
