"""Run configuration: defaults, plain-text dotted-key loading, and
load-time validation (weight sums and the no-false-commit calibration
constraint), so the per-step loop never has to re-check anything."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .executive import Thresholds
from .signals import SignalParams
from .states import StateWeights
from .world import PerceptionParams, WorldParams


class ConfigError(ValueError):
    pass


@dataclass
class BenchParams:
    count_k2: int = 300
    count_k3: int = 200
    master_seed: int = 20240901
    budget_k2: int = 500
    budget_k3: int = 650
    infeasible_fraction: float = 0.2
    min_separation: float = 4.0  # meters, pairwise goal geodesic
    success_radius: float = 1.0  # meters, truth check at commit
    reward: float = 1.0  # per-goal reward in the utility metric
    lambda_cost: float = 0.0  # per-step cost in the utility metric

    def validate(self) -> None:
        if self.count_k2 < 0 or self.count_k3 < 0:
            raise ValueError("episode counts must be nonnegative")
        if not (0.0 <= self.infeasible_fraction <= 1.0):
            raise ValueError("infeasible_fraction must be in [0, 1]")
        if self.success_radius <= 0:
            raise ValueError("success_radius must be positive")
        if self.budget_k2 < 1 or self.budget_k3 < 1:
            raise ValueError("budgets must be positive")


@dataclass
class RunConfig:
    thresholds: Thresholds = field(default_factory=Thresholds)
    weights: StateWeights = field(default_factory=StateWeights)
    signal: SignalParams = field(default_factory=SignalParams)
    perception: PerceptionParams = field(default_factory=PerceptionParams)
    world: WorldParams = field(default_factory=WorldParams)
    bench: BenchParams = field(default_factory=BenchParams)

    def validate(self) -> None:
        self.thresholds.validate()
        self.weights.validate()
        self.signal.validate()
        self.perception.validate()
        self.bench.validate()
        # Calibration constraint: a flat, fully stable baseline evidence
        # stream on an absent goal must not clear the commit threshold at
        # the commit-distance boundary, otherwise commits become pure
        # proximity triggers.
        w = self.weights
        floor = (
            w.acc_e * self.perception.base_noise_mean
            + w.acc_stab * 1.0
            + w.acc_prox * math.exp(-self.thresholds.commit_distance / w.prox_scale)
        )
        if self.thresholds.commit <= floor:
            raise ConfigError(
                f"commit threshold {self.thresholds.commit} does not exceed the "
                f"stable-baseline sufficiency floor {floor:.4f}; commits would "
                "fire on proximity alone"
            )


_SECTIONS = ("thresholds", "weights", "signal", "perception", "world", "bench")


def _coerce(raw: str, template: Any) -> Any:
    raw = raw.strip()
    if template is None or isinstance(template, float):
        if raw.lower() in ("none", ""):
            return None
        return float(raw)
    if isinstance(template, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(template, int):
        return int(raw)
    return raw


def apply_overrides(config: RunConfig, overrides: dict[str, str]) -> RunConfig:
    """Apply dotted-key string overrides (e.g. 'thresholds.abort': '0.25')
    onto a config. Unknown keys raise ConfigError."""
    for key, raw in overrides.items():
        parts = key.split(".")
        if len(parts) != 2 or parts[0] not in _SECTIONS:
            raise ConfigError(f"unknown configuration key: {key!r}")
        section = getattr(config, parts[0])
        names = {f.name for f in dataclasses.fields(section)}
        if parts[1] not in names:
            raise ConfigError(f"unknown configuration key: {key!r}")
        current = getattr(section, parts[1])
        try:
            value = _coerce(raw, current)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from exc
        setattr(section, parts[1], value)
    return config


def load_config(path: str | Path | None = None,
                overrides: dict[str, str] | None = None) -> RunConfig:
    """Build a config from defaults, an optional key=value file with a
    flat dotted-key namespace, and optional overrides; then validate."""
    config = RunConfig()
    file_overrides: dict[str, str] = {}
    if path is not None:
        text = Path(path).read_text()
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, raw = line.split("=", 1)
            file_overrides[key.strip()] = raw.strip()
    apply_overrides(config, file_overrides)
    if overrides:
        apply_overrides(config, overrides)
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config
