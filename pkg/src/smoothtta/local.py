"""Closed-form local correction branch.

Splits the prefix error into a slow drift (removed), a fast component
(propagated smoothly across the horizon through the transfer operator), and
a systematic level offset (repeated as a rank-one bias field). A tiny
per-channel ridge fit then mixes the two fields against the observed prefix,
with the coefficients clipped so sparse evidence can never be over-amplified.
No trainable weights anywhere in this branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import TransferOperator


@dataclass(frozen=True)
class LocalCorrection:
    """Local branch output: the two basis fields, fitted coefficients, result.

    coefficients is (2, d): row 0 scales the propagated field, row 1 the bias
    field, already clipped to the configured box.
    """

    harmonic_field: np.ndarray
    bias_field: np.ndarray
    coefficients: np.ndarray
    combined: np.ndarray


def extract_fast_error(prefix_error: np.ndarray) -> np.ndarray:
    """Remove slow drift from the prefix error by least squares, per channel.

    The projection span degrades with prefix length: constant + linear for
    a >= 3, constant only for a = 2 (a two-point linear fit would annihilate
    everything), and the identity for a = 1.
    """
    R = np.asarray(prefix_error, dtype=float)
    a = R.shape[0]
    if a <= 1:
        return R.copy()
    h = np.arange(1, a + 1, dtype=float)
    if a == 2:
        basis = np.ones((a, 1))
    else:
        basis = np.column_stack([np.ones(a), h])
    coef, *_ = np.linalg.lstsq(basis, R, rcond=None)
    return R - basis @ coef


def propagate_fast_error(op: TransferOperator, fast_error: np.ndarray) -> np.ndarray:
    """Extend the fast prefix error across the horizon: P[:, :a] @ R_fast."""
    R = np.asarray(fast_error, dtype=float)
    a = R.shape[0]
    if a > op.horizon:
        raise ValueError(f"prefix length {a} exceeds operator horizon {op.horizon}")
    return op.prefix_columns(a) @ R


def bias_field(prefix_error: np.ndarray, horizon: int) -> np.ndarray:
    """Rank-one field repeating the prefix-mean error down the horizon."""
    R = np.asarray(prefix_error, dtype=float)
    mu = R.mean(axis=0)
    return np.tile(mu, (horizon, 1))


class InvalidRidgeError(ValueError):
    """Ridge coefficient must be strictly positive (keeps the 2x2 solve regular)."""


def fit_bounded_response(
    harmonic: np.ndarray,
    bias: np.ndarray,
    prefix_error: np.ndarray,
    ridge_coef: float = 0.03,
    coef_clip: float = 0.5,
    response_mix: float = 0.55,
) -> LocalCorrection:
    """Per-channel 2-parameter ridge fit of the basis fields to the prefix.

    Solves min ||B_prefix beta - r||^2 + ridge * ||beta||^2 for each channel
    with B = [harmonic, bias], clips beta into [-coef_clip, coef_clip], and
    scales the combined field by response_mix.
    """
    if not ridge_coef > 0:
        raise InvalidRidgeError(f"ridge coefficient must be > 0, got {ridge_coef}")
    R = np.asarray(prefix_error, dtype=float)
    a, d = R.shape
    beta = np.zeros((2, d))
    for c in range(d):
        B = np.column_stack([harmonic[:a, c], bias[:a, c]])
        G = B.T @ B + ridge_coef * np.eye(2)
        beta[:, c] = np.linalg.solve(G, B.T @ R[:, c])
    beta = np.clip(beta, -coef_clip, coef_clip)
    combined = response_mix * (harmonic * beta[0] + bias * beta[1])
    return LocalCorrection(
        harmonic_field=harmonic, bias_field=bias, coefficients=beta, combined=combined
    )


def solve_local(
    boundary_error: np.ndarray,
    op: TransferOperator,
    ridge_coef: float = 0.03,
    coef_clip: float = 0.5,
    response_mix: float = 0.55,
) -> LocalCorrection:
    """Full local branch: drift removal, propagation, bias, bounded fit."""
    horizon = op.horizon
    d = boundary_error.shape[1]
    if boundary_error.shape[0] == 0:
        zero = np.zeros((horizon, d))
        return LocalCorrection(zero, zero.copy(), np.zeros((2, d)), zero.copy())
    fast = extract_fast_error(boundary_error)
    harm = propagate_fast_error(op, fast)
    bias = bias_field(boundary_error, horizon)
    return fit_bounded_response(
        harm, bias, boundary_error, ridge_coef, coef_clip, response_mix
    )
