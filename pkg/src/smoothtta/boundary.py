"""Turning delayed observations into a boundary for the correction solver.

The first few revealed target steps of a window, compared against the frozen
forecast, give a prefix error. That prefix is the boundary evidence everything
downstream consumes: the propagation solver reads the raw prefix error, the
global decoder reads a zero-padded full-horizon copy plus an observation mask.
Prefix length is tied to the dominant input period estimated from the
lookback spectrum, so the boundary covers a meaningful temporal scale instead
of an arbitrary number of steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PrefixBoundary:
    """Revealed prefix error and its full-horizon masked representation.

    length        number of revealed steps a (0 means nothing revealed yet)
    prefix_error  (a, d) observed minus forecast on the revealed steps
    padded_error  (H, d) prefix error zero-padded to the horizon
    mask          (H,) 1.0 on observed steps, 0.0 elsewhere
    """

    length: int
    prefix_error: np.ndarray
    padded_error: np.ndarray
    mask: np.ndarray

    @property
    def horizon(self) -> int:
        return self.padded_error.shape[0]

    @property
    def channels(self) -> int:
        return self.padded_error.shape[1]

    def is_empty(self) -> bool:
        return self.length == 0


def empty_boundary(horizon: int, channels: int) -> PrefixBoundary:
    """Sentinel for a pure zero-shot window: solver must return zero correction."""
    return PrefixBoundary(
        length=0,
        prefix_error=np.zeros((0, channels)),
        padded_error=np.zeros((horizon, channels)),
        mask=np.zeros(horizon),
    )


def estimate_dominant_period(
    lookback: np.ndarray, fallback: int = 2, zero_tol: float = 1e-12
) -> int:
    """Dominant period of the lookback window via the mean amplitude spectrum.

    Per channel the mean is removed and the real-input Fourier amplitude
    spectrum is taken; amplitudes are averaged across channels and the
    strongest nonzero-frequency bin k* wins, with ties broken toward the
    lower frequency (longer period). Returns round(L / k*) clamped to
    [2, L]. A flat lookback has an empty spectrum and falls back to the
    configured minimum prefix support.
    """
    X = np.atleast_2d(np.asarray(lookback, dtype=float))
    if np.ndim(lookback) == 1:
        X = X.T
    L = X.shape[0]
    if L < 4:
        raise ValueError(f"period estimation needs lookback length >= 4, got {L}")
    centered = X - X.mean(axis=0, keepdims=True)
    amplitude = np.abs(np.fft.rfft(centered, axis=0)).mean(axis=1)
    amplitude = amplitude[1:]  # drop DC
    peak = float(amplitude.max(initial=0.0))
    if peak <= zero_tol * max(1.0, float(np.abs(X).max())):
        return fallback
    k_star = int(np.argmax(amplitude)) + 1  # argmax takes the first (lowest) bin on ties
    period = int(round(L / k_star))
    return min(max(period, 2), L)


def select_prefix_length(
    period: int, revealed_count: int, horizon: int, min_support: int
) -> int:
    """Prefix length: the period budget capped by availability and horizon.

    The period is an upper budget, not a guarantee; a minimum support floor
    keeps degenerate one-step periods from starving the boundary. Zero
    revealed steps means a zero-shot window (returns 0).
    """
    if revealed_count <= 0:
        return 0
    a = min(period, revealed_count, horizon)
    return max(a, min(min_support, revealed_count))


def build_boundary(
    observed_prefix: np.ndarray, forecast: np.ndarray, length: int
) -> PrefixBoundary:
    """Boundary from the first `length` revealed targets against the forecast."""
    forecast = np.asarray(forecast, dtype=float)
    horizon, channels = forecast.shape
    if length == 0:
        return empty_boundary(horizon, channels)
    if not 1 <= length <= horizon:
        raise ValueError(f"prefix length {length} outside [1, {horizon}]")
    observed = np.atleast_2d(np.asarray(observed_prefix, dtype=float))
    if np.ndim(observed_prefix) == 1:
        observed = observed.T
    if observed.shape != (length, channels):
        raise ValueError(
            f"observed prefix has shape {observed.shape}, expected {(length, channels)}"
        )
    prefix_error = observed - forecast[:length]
    padded = np.zeros((horizon, channels))
    padded[:length] = prefix_error
    mask = np.zeros(horizon)
    mask[:length] = 1.0
    return PrefixBoundary(
        length=length, prefix_error=prefix_error, padded_error=padded, mask=mask
    )


def anchor_boundary(
    observed: np.ndarray,
    forecast: np.ndarray,
    support: int,
    anchor_positions: np.ndarray,
) -> PrefixBoundary:
    """Boundary for the sparse-anchor protocol.

    Within the support window only the anchor positions carry true
    observations; every other support position keeps the zero-shot
    prediction and therefore contributes exactly zero residual. The mask
    marks the anchors so the decoder can tell them from unobserved steps.
    """
    forecast = np.asarray(forecast, dtype=float)
    horizon, channels = forecast.shape
    if not 1 <= support <= horizon:
        raise ValueError(f"support window {support} outside [1, {horizon}]")
    prefix_error = np.zeros((support, channels))
    pos = np.asarray(anchor_positions, dtype=int)
    if pos.size:
        if pos.min() < 0 or pos.max() >= support:
            raise ValueError("anchor positions must lie inside the support window")
        prefix_error[pos] = np.asarray(observed, dtype=float)[pos] - forecast[pos]
    padded = np.zeros((horizon, channels))
    padded[:support] = prefix_error
    mask = np.zeros(horizon)
    mask[pos] = 1.0
    return PrefixBoundary(
        length=support, prefix_error=prefix_error, padded_error=padded, mask=mask
    )


class InvalidRatioError(ValueError):
    """Contamination ratio must lie in [0, 1]."""


def contaminate_prefix(
    boundary: PrefixBoundary,
    forecast: np.ndarray,
    ratio: float,
    sigma: np.ndarray,
    rng_seed: int,
    magnitude: float = 6.0,
) -> PrefixBoundary:
    """Replace a fraction of prefix observations by large outliers.

    Per channel, ceil(ratio * a) positions are drawn without replacement
    (seeded, so bit-reproducible) and the observed value there is replaced
    by +-magnitude * sigma_channel with a uniform random sign. The prefix
    error is rebuilt from the corrupted observations; evaluation targets are
    never touched.
    """
    if not 0.0 <= ratio <= 1.0:
        raise InvalidRatioError(f"contamination ratio must be in [0, 1], got {ratio}")
    if boundary.is_empty() or ratio == 0.0:
        return boundary
    a = boundary.length
    forecast = np.asarray(forecast, dtype=float)
    channels = boundary.channels
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (channels,))
    observed = boundary.prefix_error + forecast[:a]
    corrupted = observed.copy()
    n_hit = math.ceil(ratio * a)
    rng = np.random.default_rng(rng_seed)
    for c in range(channels):
        pos = rng.choice(a, size=n_hit, replace=False)
        signs = rng.choice([-1.0, 1.0], size=n_hit)
        corrupted[pos, c] = signs * magnitude * sigma[c]
    return build_boundary(corrupted, forecast, a)
