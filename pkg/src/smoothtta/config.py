"""Solver and rollout configuration.

Every solver hyperparameter defaults to the values used throughout the
reference experiments; overrides land in the run manifest so reports stay
comparable. Config files are flat `key = value` text, keys matching the
dataclass field names below.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Bad configuration value or file (CLI exit code 2)."""


@dataclass
class SolverConfig:
    """Hyperparameters of the correction solver."""

    min_prefix_support: int = 2      # floor on the prefix length
    smoothness_alpha: float = 0.15   # transfer-operator regularizer
    ridge_coef: float = 0.03         # local 2-parameter ridge
    basis_clip: float = 0.5          # local coefficient box
    local_mix: float = 0.55          # local response scale
    context_size: int = 8            # memory summary ring length K
    hidden_dim: int = 256            # decoder hidden width
    memory_decay: float = 0.5        # EMA retention rho
    global_scale: float = 1.5        # decoder output scale
    global_mix: float = 0.7          # fusion gamma
    ramp_midpoint: float = 0.25      # fusion tau
    ramp_sharpness: float = 8.0      # fusion kappa
    correction_clip: float = 2.5     # fusion safety bound c

    # ablation switches (test-time only; checkpoints are shared)
    local_only: bool = False         # gamma forced to 0
    global_only: bool = False        # local field forced to 0
    no_bound: bool = False           # clip disabled (c = inf)
    no_memory: bool = False          # memory frozen at cold start

    def validate(self) -> None:
        if self.min_prefix_support < 1:
            raise ConfigError("min_prefix_support must be >= 1")
        if not self.smoothness_alpha > 0:
            raise ConfigError("smoothness_alpha must be > 0")
        if not self.ridge_coef > 0:
            raise ConfigError("ridge_coef must be > 0")
        if not 0.0 <= self.memory_decay <= 1.0:
            raise ConfigError("memory_decay must lie in [0, 1]")

    def effective_clip(self) -> float:
        return math.inf if self.no_bound else self.correction_clip

    def effective_global_mix(self) -> float:
        return 0.0 if self.local_only else self.global_mix


@dataclass
class RolloutConfig:
    """Rollout engine settings on top of the solver hyperparameters."""

    lookback: int = 96
    horizon: int = 96
    stride: int | None = None        # None -> non-overlapping (stride = horizon)
    prefix_mode: str = "fft"         # "fft" or a fixed length via prefix_length
    prefix_length: int | None = None
    seed: int = 0
    standardize: bool = True         # z-score channels by train-split statistics
    memory_schedule: str = "safe"    # "immediate" is a leakage-test hook
    max_windows: int | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)

    def validate(self) -> None:
        self.solver.validate()
        if self.lookback < 4:
            raise ConfigError("lookback must be >= 4 (period estimation needs it)")
        if self.horizon < 2:
            raise ConfigError("horizon must be >= 2")
        if self.stride is not None and self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.prefix_mode not in ("fft", "fixed"):
            raise ConfigError(f"unknown prefix_mode {self.prefix_mode!r}")
        if self.prefix_mode == "fixed" and not self.prefix_length:
            raise ConfigError("prefix_mode=fixed requires prefix_length")
        if self.memory_schedule not in ("safe", "immediate"):
            raise ConfigError(f"unknown memory_schedule {self.memory_schedule!r}")

    @property
    def effective_stride(self) -> int:
        return self.stride if self.stride is not None else self.horizon

    def manifest(self) -> dict:
        out = dataclasses.asdict(self)
        solver = out.pop("solver")
        solver["effective_clip"] = (
            "inf" if self.solver.no_bound else self.solver.correction_clip
        )
        out["solver"] = solver
        out["stride"] = self.effective_stride
        out["correction_units"] = "train-standardized" if self.standardize else "raw"
        return out


_BOOL_WORDS = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def _coerce(raw: str, target_type):
    raw = raw.strip()
    if target_type is bool:
        if raw.lower() not in _BOOL_WORDS:
            raise ConfigError(f"expected a boolean, got {raw!r}")
        return _BOOL_WORDS[raw.lower()]
    if raw.lower() in ("none", ""):
        return None
    try:
        return target_type(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r} as {target_type.__name__}") from exc


def apply_overrides(config: RolloutConfig, pairs: dict[str, str]) -> RolloutConfig:
    """Apply string key=value overrides onto a rollout config (in place)."""
    solver_fields = {f.name: f for f in dataclasses.fields(SolverConfig)}
    rollout_fields = {f.name: f for f in dataclasses.fields(RolloutConfig)}
    for key, raw in pairs.items():
        if key in solver_fields:
            f = solver_fields[key]
            base = f.type if isinstance(f.type, type) else type(getattr(config.solver, key))
            setattr(config.solver, key, _coerce(raw, base))
        elif key in rollout_fields and key != "solver":
            current = getattr(config, key)
            if key in ("stride", "prefix_length", "max_windows"):
                base = int
            elif current is None:
                base = str
            else:
                base = type(current)
            setattr(config, key, _coerce(raw, base))
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    config.validate()
    return config


def load_config_file(path) -> dict[str, str]:
    """Parse a flat `key = value` config file; '#' starts a comment."""
    pairs: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, raw = stripped.split("=", 1)
            pairs[key.strip()] = raw.strip()
    return pairs
