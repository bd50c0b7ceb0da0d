"""Online statistics over the evidence stream and distance telemetry.

Everything here is windowed: the caller owns a RollingWindow per goal
context, pushes one (distance, evidence) sample per step, and reads back
a SignalSummary with the smoothed score, windowed variance, stability,
progress velocity and information gain.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional


class InvalidBoundsError(ValueError):
    pass


def clip(x: float, lo: float, hi: float) -> float:
    """Saturate x into [lo, hi]."""
    if lo > hi:
        raise InvalidBoundsError(f"lower bound {lo} exceeds upper bound {hi}")
    return max(lo, min(x, hi))


@dataclass(frozen=True)
class SignalSample:
    """One step of telemetry: geodesic distance to the active goal and the
    raw evidence score in [0, 1]."""

    step: int
    distance: float
    evidence: float


@dataclass
class SignalParams:
    window: int = 5
    ema_alpha: Optional[float] = None  # None = simple moving average
    sigma_norm: float = 0.001
    epsilon: float = 1e-6
    step_length: float = 0.5  # meters per primitive step

    def validate(self) -> None:
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.sigma_norm <= 0:
            raise ValueError("sigma_norm must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.step_length <= 0:
            raise ValueError("step_length must be positive")
        if self.ema_alpha is not None and not (0.0 < self.ema_alpha < 1.0):
            raise ValueError("ema_alpha must be in (0, 1)")


@dataclass
class SignalSummary:
    mean: float = 0.0
    variance: float = 0.0
    prev_variance: float = 0.0
    stability: float = 1.0
    velocity: float = 0.0
    info_gain: float = 0.0


class RollingWindow:
    """Fixed-capacity window over the most recent evidence values and
    distances, with running sums for O(1) variance updates.

    Also remembers the variance from `capacity` steps ago so that the
    information gain (variance reduction across one full window) can be
    computed without replaying the stream.
    """

    def __init__(self, capacity: int):
        if capacity < 2:
            raise ValueError("window capacity must be >= 2")
        self.capacity = capacity
        self.samples: deque[float] = deque(maxlen=capacity)
        self.distances: deque[float] = deque(maxlen=capacity)
        self._sum = 0.0
        self._sumsq = 0.0
        self._count_total = 0  # samples seen since last reset
        self._var_history: deque[float] = deque(maxlen=capacity + 1)
        self._ema: Optional[float] = None

    def __len__(self) -> int:
        return len(self.samples)

    def reset(self) -> None:
        self.samples.clear()
        self.distances.clear()
        self._sum = 0.0
        self._sumsq = 0.0
        self._count_total = 0
        self._var_history.clear()
        self._ema = None

    def push(self, evidence: float, distance: float) -> None:
        if len(self.samples) == self.capacity:
            old = self.samples[0]
            self._sum -= old
            self._sumsq -= old * old
        self.samples.append(evidence)
        self.distances.append(distance)
        self._sum += evidence
        self._sumsq += evidence * evidence
        self._count_total += 1

    def mean(self, params: SignalParams) -> float:
        n = len(self.samples)
        if n == 0:
            return 0.0
        if params.ema_alpha is None:
            return self._sum / n
        a = params.ema_alpha
        if self._ema is None:
            self._ema = self.samples[-1]
        else:
            self._ema = a * self._ema + (1.0 - a) * self.samples[-1]
        return self._ema

    def variance_about(self, m: float) -> float:
        """Population variance of the window contents about mean m."""
        n = len(self.samples)
        if n == 0:
            return 0.0
        v = self._sumsq / n - 2.0 * m * (self._sum / n) + m * m
        return v if v > 0.0 else 0.0


def stability(variance: float, params: SignalParams) -> float:
    """Map windowed variance to a stability score in [0, 1] by inverting
    the normalized variance; saturates to 0 once variance reaches the
    normalization constant."""
    return 1.0 - clip(variance / (params.sigma_norm + params.epsilon), 0.0, 1.0)


def progress_velocity(window: RollingWindow, params: SignalParams) -> float:
    """Rate of distance reduction over the window, normalized by the
    maximum displacement achievable in the same span and clipped to
    [-1, 1]. Positive means approaching the goal; fewer than two samples
    yields a neutral 0."""
    n = len(window.distances)
    if n < 2:
        return 0.0
    raw = (window.distances[0] - window.distances[-1]) / ((n - 1) * params.step_length)
    return clip(raw, -1.0, 1.0)


def info_gain(summary_prev_window: SignalSummary, summary_now: SignalSummary) -> float:
    """Variance reduction between two full windows one window apart.
    Positive means uncertainty is resolving."""
    return summary_prev_window.variance - summary_now.variance


def update(window: RollingWindow, sample: SignalSample, params: SignalParams) -> SignalSummary:
    """Advance the window by one sample and recompute all derived
    statistics. Partial windows are allowed: statistics cover whatever
    samples exist."""
    window.push(sample.evidence, sample.distance)
    m = window.mean(params)
    var = window.variance_about(m)
    window._var_history.append(var)

    # info gain needs the variance from W steps back, with both that
    # window and the current one full
    prev_var = 0.0
    gain = 0.0
    if (
        window._count_total >= 2 * window.capacity
        and len(window._var_history) == window.capacity + 1
    ):
        prev_var = window._var_history[0]
        gain = prev_var - var

    return SignalSummary(
        mean=m,
        variance=var,
        prev_variance=prev_var,
        stability=stability(var, params),
        velocity=progress_velocity(window, params),
        info_gain=gain,
    )
