"""Cross-window error memory.

Keeps an exponentially weighted template of full-horizon residuals over
completed windows, plus a small ring of per-window summary statistics that
the global decoder consumes as a context vector. Updates are only legal for
windows whose entire target horizon has been revealed; the rollout schedule
enforces that, and states are immutable so every window corrects against a
well-defined snapshot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class MemoryState:
    """Immutable snapshot of the error memory.

    template       (H, d) EMA of completed-window residuals
    context_ring   up to `context_size` (mean, mean_abs) summaries,
                   oldest first
    updates        number of applied updates (the snapshot version)
    decay          EMA retention factor rho in [0, 1]
    """

    template: np.ndarray
    context_ring: tuple[tuple[float, float], ...]
    updates: int
    decay: float
    context_size: int = 8
    empty_batch_warnings: int = 0

    def __post_init__(self):
        if not 0.0 <= self.decay <= 1.0:
            raise ValueError(f"decay must lie in [0, 1], got {self.decay}")
        t = np.asarray(self.template, dtype=float)
        t.flags.writeable = False
        object.__setattr__(self, "template", t)

    @property
    def horizon(self) -> int:
        return self.template.shape[0]

    @property
    def channels(self) -> int:
        return self.template.shape[1]


def cold_start(horizon: int, channels: int, decay: float = 0.5, context_size: int = 8) -> MemoryState:
    """Zero template, empty ring: zero long-range correction before evidence."""
    return MemoryState(
        template=np.zeros((horizon, channels)),
        context_ring=(),
        updates=0,
        decay=decay,
        context_size=context_size,
    )


def update_memory(state: MemoryState, batch_residuals: list[np.ndarray]) -> MemoryState:
    """Fold a batch of completed-window residuals into the memory.

    template <- decay * template + (1 - decay) * batch_mean; the ring gets
    one (mean, mean_abs) summary per window in the batch. An empty batch is
    a warned no-op that does not advance the version counter. Caller is
    responsible for only passing residuals of fully revealed windows.
    """
    if len(batch_residuals) == 0:
        return replace(state, empty_batch_warnings=state.empty_batch_warnings + 1)
    residuals = [np.asarray(r, dtype=float) for r in batch_residuals]
    shape = (state.horizon, state.channels)
    for r in residuals:
        if r.shape != shape:
            raise ValueError(f"residual shape {r.shape} does not match memory {shape}")
    batch_mean = np.mean(residuals, axis=0)
    template = state.decay * state.template + (1.0 - state.decay) * batch_mean
    ring = list(state.context_ring)
    for r in residuals:
        ring.append((float(r.mean()), float(np.abs(r).mean())))
    ring = ring[-state.context_size:]
    return replace(
        state,
        template=template,
        context_ring=tuple(ring),
        updates=state.updates + 1,
    )


def context_vector(state: MemoryState) -> np.ndarray:
    """Flat length-2K context: (mean, mean_abs) per ring slot, oldest first.

    Slots without a completed window yet are zero, padded at the front so
    the newest window always sits at the end of the vector.
    """
    K = state.context_size
    z = np.zeros(2 * K)
    entries = state.context_ring[-K:]
    offset = K - len(entries)
    for i, (mean, mean_abs) in enumerate(entries):
        z[2 * (offset + i)] = mean
        z[2 * (offset + i) + 1] = mean_abs
    return z


def save_snapshot(state: MemoryState, path) -> None:
    """Serialize to a versioned JSON snapshot (floats round-trip bit-exactly)."""
    payload = {
        "version": SNAPSHOT_VERSION,
        "horizon": state.horizon,
        "channels": state.channels,
        "context_size": state.context_size,
        "decay": state.decay,
        "updates": state.updates,
        "empty_batch_warnings": state.empty_batch_warnings,
        "context_ring": [list(entry) for entry in state.context_ring],
        "template": state.template.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_snapshot(path) -> MemoryState:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported memory snapshot version {payload.get('version')}")
    template = np.array(payload["template"], dtype=float)
    if template.shape != (payload["horizon"], payload["channels"]):
        raise ValueError("snapshot template shape does not match its header")
    return MemoryState(
        template=template,
        context_ring=tuple((float(m), float(ma)) for m, ma in payload["context_ring"]),
        updates=int(payload["updates"]),
        decay=float(payload["decay"]),
        context_size=int(payload["context_size"]),
        empty_batch_warnings=int(payload["empty_batch_warnings"]),
    )
