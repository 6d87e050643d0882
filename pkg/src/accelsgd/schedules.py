"""Time-indexed coefficient schedules.

Learning rates, momentum coefficients, gradient weights (alpha), and
weight-averaging coefficients are all pure functions of a 1-based step index
``t``; the 1-based convention keeps the ``1/t``-style rules defined at the
first step.  Schedule objects are immutable and freely shareable.

The scalar accessors (``lr_at`` etc.) are the reference semantics; the
vectorised ``*_seq`` helpers evaluate t = 1..T in one call and are what run
loops use to avoid per-step Python overhead.
"""

import math
from dataclasses import dataclass

import numpy as np

LR_KINDS = ("constant", "cosine-with-warmup")
MOMENTUM_KINDS = ("constant", "one-minus-k-over-t", "half-life-warmup",
                  "schedule-free-c")
ALPHA_KINDS = ("constant", "linear-warmup")
AVERAGING_KINDS = ("uniform", "tailed", "as-written-max")


@dataclass(frozen=True)
class LearningRateSchedule:
    """Step size eta(t): linear warmup to ``peak``, then optional cosine decay.

    ``constant`` holds ``peak`` after warmup; ``cosine-with-warmup`` decays
    from ``peak`` to ``floor`` over the remaining ``total_steps - warmup``.
    """

    kind: str = "constant"
    peak: float = 1e-3
    warmup_steps: int = 0
    total_steps: int | None = None
    floor: float = 0.0

    def __post_init__(self):
        if self.kind not in LR_KINDS:
            raise ValueError(f"unknown learning-rate kind {self.kind!r}")
        if self.peak <= 0:
            raise ValueError("peak learning rate must be > 0")
        if self.floor < 0 or self.floor > self.peak:
            raise ValueError("floor must satisfy 0 <= floor <= peak")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.kind == "cosine-with-warmup":
            if self.total_steps is None or self.total_steps <= 0:
                raise ValueError("cosine-with-warmup requires total_steps > 0")
            if self.warmup_steps > self.total_steps:
                raise ValueError("warmup_steps must not exceed total_steps")


def constant_lr(peak: float) -> LearningRateSchedule:
    return LearningRateSchedule(kind="constant", peak=peak)


def lr_at(s: LearningRateSchedule, t: int) -> float:
    """Learning rate at step t (1-based)."""
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    if s.kind == "constant":
        if s.warmup_steps and t <= s.warmup_steps:
            return s.peak * t / s.warmup_steps
        return s.peak
    if s.total_steps is not None and t > s.total_steps:
        raise ValueError(f"step {t} out of range for total_steps={s.total_steps}")
    if s.warmup_steps and t <= s.warmup_steps:
        return s.peak * t / s.warmup_steps
    span = s.total_steps - s.warmup_steps
    frac = (t - s.warmup_steps) / span
    return s.floor + 0.5 * (s.peak - s.floor) * (1.0 + math.cos(math.pi * frac))


def lr_seq(s: LearningRateSchedule, total: int) -> np.ndarray:
    return np.array([lr_at(s, t) for t in range(1, total + 1)])


@dataclass(frozen=True)
class MomentumSchedule:
    """Momentum coefficient beta(t), or the averaging weight c_t.

    Kinds:

    * ``constant`` -- ``base`` for every t.
    * ``one-minus-k-over-t`` -- ``max(0, 1 - k/t)``, the growing-momentum
      family used by accelerated SGD.
    * ``half-life-warmup`` -- interpolates from ``beta_start`` to ``base``
      linearly in half-life (1/log beta) space over ``warmup_horizon`` steps,
      the standard warmup for very slow EMAs.
    * ``schedule-free-c`` -- emits the polynomial averaging weight
      c_t = t^r / sum_{i<=t} i^r.  r = 0 gives c_t = 1/t (uniform averaging).
      Note c_1 = 1 for every r: the running average restarts at the first
      iterate, so this kind alone may emit the value 1.
    """

    kind: str = "constant"
    base: float = 0.9
    k: float = 1.0
    beta_start: float = 0.9
    warmup_horizon: int = 1
    r: float = 0.0

    def __post_init__(self):
        if self.kind not in MOMENTUM_KINDS:
            raise ValueError(f"unknown momentum kind {self.kind!r}")
        if self.kind in ("constant", "one-minus-k-over-t") and not 0 <= self.base < 1:
            raise ValueError("momentum base must lie in [0, 1)")
        if self.kind == "one-minus-k-over-t" and self.k <= 0:
            raise ValueError("k must be > 0")
        if self.kind == "half-life-warmup":
            if not (0 < self.base < 1 and 0 < self.beta_start < 1):
                raise ValueError("half-life-warmup needs base and beta_start in (0, 1)")
            if self.warmup_horizon < 1:
                raise ValueError("warmup_horizon must be >= 1")
        if self.kind == "schedule-free-c" and self.r < 0:
            raise ValueError("r must be >= 0")


def constant_momentum(base: float) -> MomentumSchedule:
    return MomentumSchedule(kind="constant", base=base)


# Cumulative sums of the polynomial weights i^r, grown on demand so that
# sequential schedule-free-c lookups stay O(1) amortised.
_cum_weights_cache: dict[float, np.ndarray] = {}


def _cum_weights(r: float, upto: int) -> np.ndarray:
    cached = _cum_weights_cache.get(r)
    if cached is None or cached.shape[0] < upto:
        n = max(upto, 1024, 2 * (0 if cached is None else cached.shape[0]))
        w = np.arange(1, n + 1, dtype=float) ** r
        _cum_weights_cache[r] = np.cumsum(w)
    return _cum_weights_cache[r]


def schedule_free_c(r: float, t: int) -> float:
    """Polynomial averaging weight c_t = t^r / sum_{i=1..t} i^r."""
    cum = _cum_weights(r, t)
    return float(t ** r) / float(cum[t - 1])


def momentum_at(s: MomentumSchedule, t: int) -> float:
    """Momentum coefficient (or c_t for schedule-free-c) at step t."""
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    if s.kind == "constant":
        return s.base
    if s.kind == "one-minus-k-over-t":
        return max(0.0, 1.0 - s.k / t)
    if s.kind == "half-life-warmup":
        if s.base == s.beta_start:
            return s.base
        u = min(1.0, t / s.warmup_horizon)
        log_s, log_b = math.log(s.beta_start), math.log(s.base)
        return math.exp(log_s * log_b / ((1.0 - u) * log_b + u * log_s))
    return schedule_free_c(s.r, t)


def momentum_seq(s: MomentumSchedule, total: int) -> np.ndarray:
    t = np.arange(1, total + 1, dtype=float)
    if s.kind == "constant":
        return np.full(total, s.base)
    if s.kind == "one-minus-k-over-t":
        return np.maximum(0.0, 1.0 - s.k / t)
    if s.kind == "schedule-free-c":
        cum = _cum_weights(s.r, total)
        return (t ** s.r) / cum[:total]
    return np.array([momentum_at(s, int(i)) for i in range(1, total + 1)])


@dataclass(frozen=True)
class AlphaSchedule:
    """Weight alpha(t) on the current gradient in mixed updates."""

    kind: str = "constant"
    target: float = 0.0
    warmup_horizon: int = 1

    def __post_init__(self):
        if self.kind not in ALPHA_KINDS:
            raise ValueError(f"unknown alpha kind {self.kind!r}")
        if self.target < 0:
            raise ValueError("alpha target must be >= 0")
        if self.kind == "linear-warmup" and self.warmup_horizon < 1:
            raise ValueError("warmup_horizon must be >= 1")


def constant_alpha(target: float) -> AlphaSchedule:
    return AlphaSchedule(kind="constant", target=target)


def alpha_at(s: AlphaSchedule, t: int) -> float:
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    if s.kind == "constant":
        return s.target
    return min(s.target, s.target * t / s.warmup_horizon)


def alpha_seq(s: AlphaSchedule, total: int) -> np.ndarray:
    t = np.arange(1, total + 1, dtype=float)
    if s.kind == "constant":
        return np.full(total, s.target)
    return np.minimum(s.target, s.target * t / s.warmup_horizon)


@dataclass(frozen=True)
class AveragingSchedule:
    """Weight c_t kept on the OLD running average in
    ``w_avg <- c_t * w_avg + (1 - c_t) * w``.

    * ``uniform`` -- c_t = 1 - 1/t, the running arithmetic mean.
    * ``tailed`` -- c_t = max(0, 1 - 1/(delta*t)): an effective window over
      roughly the most recent ``delta`` fraction of the steps.
    * ``as-written-max`` -- c_t = max(1 - 1/t, 1 - 1/(delta*t)).  For
      delta <= 1 this always equals the uniform rule; it is kept because the
      averaging-based Adam listing states it in exactly this form.
    """

    kind: str = "uniform"
    delta: float = 0.1

    def __post_init__(self):
        if self.kind not in AVERAGING_KINDS:
            raise ValueError(f"unknown averaging kind {self.kind!r}")
        if self.kind != "uniform" and not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")


def averaging_coeff(s: AveragingSchedule, t: int) -> float:
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    if s.kind == "uniform":
        return 1.0 - 1.0 / t
    if s.kind == "as-written-max":
        return max(1.0 - 1.0 / t, 1.0 - 1.0 / (s.delta * t))
    return max(0.0, 1.0 - 1.0 / (s.delta * t))


def averaging_seq(s: AveragingSchedule, total: int) -> np.ndarray:
    t = np.arange(1, total + 1, dtype=float)
    if s.kind == "uniform":
        return 1.0 - 1.0 / t
    if s.kind == "as-written-max":
        return np.maximum(1.0 - 1.0 / t, 1.0 - 1.0 / (s.delta * t))
    return np.maximum(0.0, 1.0 - 1.0 / (s.delta * t))
