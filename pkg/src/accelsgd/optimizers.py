"""Optimizer step rules behind one uniform interface.

Every algorithm is driven the same way::

    state = init_state(config, w0)
    for _ in range(T):
        q = query_point(state, config)     # where the gradient must be taken
        g = ...gradient at q...
        report = step(state, g, config)    # advances state by one step

``query_point`` differs from the current parameters only for the
schedule-free algorithms, which evaluate gradients at the interpolation
y = (1 - beta) z + beta x.  ``eval_point`` returns the parameters an
algorithm designates for evaluation (x for schedule-free, the running
average for averaging Adam, w otherwise).

Update rules (per step, t is the 1-based step index):

* ``sgd-momentum``      m <- b m + g;  w <- w - lr m
* ``accel-sgd``         m <- beta_a m + g;  w <- w - eta_a m - alpha_a g
* ``schedule-free-sgd`` z <- z - lr g(y);  x <- (1-c_t) x + c_t z
* ``adamw``             EMA m, v;  w <- w - lr m^ / (sqrt(v^) + eps)
* ``laprop``            v first, then m is an EMA of preconditioned gradients
* ``schedule-free-adamw``  the schedule-free recursion on preconditioned
                        gradients (preconditioning before momentum)
* ``lion``              w <- w - lr sign(b1 m + (1-b1) g);  m <- b2 m + (1-b2) g
* ``mars-approx``       gradient-difference correction c_t, then an Adam step on c_t
* ``ademamix``          fast EMA m1 + slow EMA m2; numerator m1^ + alpha m2
* ``simplified-ademamix``  single theory-style momentum m1 <- b1 m1 + g;
                        numerator m1 + alpha g
* ``accel-adam-avg``    Adam-style step whose numerator mixes last step's m
                        with the current gradient, followed by weight averaging

Decoupled weight decay (``- lr wd w``, using w before the step) is available
on every w-based rule; the schedule-free rules apply it at the query point y.
Bias correction is a per-config flag; algorithms whose statement omits it
(simplified-ademamix, accel-adam-avg) default to off, the Adam family
defaults to on.
"""

from dataclasses import dataclass, field

import numpy as np

from .backend import kernels as K
from .schedules import (AlphaSchedule, AveragingSchedule, LearningRateSchedule,
                        MomentumSchedule, alpha_at, averaging_coeff, lr_at,
                        momentum_at, schedule_free_c)

ALGORITHMS = (
    "sgd-momentum", "accel-sgd", "schedule-free-sgd", "adamw", "laprop",
    "schedule-free-adamw", "lion", "mars-approx", "ademamix",
    "simplified-ademamix", "accel-adam-avg",
)

_SCHEDULE_FREE = ("schedule-free-sgd", "schedule-free-adamw")

_BUFFER_MAP = {
    "sgd-momentum": ("m",),
    "accel-sgd": ("m",),
    "schedule-free-sgd": ("z", "x"),
    "schedule-free-adamw": ("z", "x", "v"),
    "adamw": ("m", "v"),
    "laprop": ("m", "v"),
    "lion": ("m",),
    "mars-approx": ("m", "v", "g_prev"),
    "ademamix": ("m1", "m2", "v"),
    "simplified-ademamix": ("m1", "v"),
    "accel-adam-avg": ("m", "v", "w_avg"),
}

# Algorithms whose statements apply bias correction by default.  For
# simplified-ademamix and accel-adam-avg the flag, when enabled, corrects
# only the second moment (their momentum terms are stated uncorrected).
_BIAS_DEFAULT = {
    "adamw": True, "laprop": True, "mars-approx": True, "ademamix": True,
    "schedule-free-adamw": True,
}


class NonFiniteUpdateError(RuntimeError):
    """A gradient or parameter update stopped being finite."""

    def __init__(self, step: int, what: str):
        super().__init__(f"non-finite {what} at step {step}")
        self.step = step
        self.what = what


@dataclass(frozen=True)
class OptimizerConfig:
    """Hyperparameters for one optimizer.

    ``lr``, ``beta1``, ``beta3`` and ``alpha`` accept either a plain float
    (held constant) or the corresponding schedule object.  Fields an
    algorithm does not use are ignored but still validated.

    accel-sgd resolves its (beta_a, eta_a, alpha_a) triple from, in order of
    precedence: explicit per-step ``accel_coeffs`` arrays; the schedule-free
    image (``accel_from_sf=True``: beta_a,t = 1 - c_{t-1},
    eta_a,t = lr(t) * beta1 * c_t, alpha_a,t = lr(t) * (1 - beta1), with c_t
    the polynomial weight of power ``sf_r``); or the generic
    (beta1, lr, alpha) schedules.
    """

    algorithm: str
    lr: LearningRateSchedule | float = 1e-3
    beta1: MomentumSchedule | float = 0.9
    beta2: float = 0.999
    beta3: MomentumSchedule | float | None = None
    alpha: AlphaSchedule | float = 0.0
    gamma: float = 0.0                      # mars-approx correction scale
    sf_r: float = 0.0                       # schedule-free polynomial power
    averaging: AveragingSchedule = field(
        default_factory=lambda: AveragingSchedule(kind="tailed", delta=0.1))
    eps: float = 1e-8
    weight_decay: float = 0.0
    bias_correction: bool | None = None     # None -> per-algorithm default
    mars_clip: bool = False
    accel_from_sf: bool = False
    accel_coeffs: tuple | None = None       # (beta_a, eta_a, alpha_a) arrays

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if isinstance(self.lr, float | int):
            if self.lr <= 0:
                raise ValueError("lr must be > 0")
        if isinstance(self.beta1, float | int):
            if self.algorithm in _SCHEDULE_FREE:
                # the z/x interpolation weight may be exactly 1
                if not 0.0 <= self.beta1 <= 1.0:
                    raise ValueError("beta1 must lie in [0, 1]")
            elif not 0.0 <= self.beta1 < 1.0:
                raise ValueError("beta1 must lie in [0, 1)")
        if not 0.0 <= self.beta2 < 1.0:
            raise ValueError("beta2 must lie in [0, 1)")
        if isinstance(self.beta3, float | int) and not 0.0 <= self.beta3 < 1.0:
            raise ValueError("beta3 must lie in [0, 1)")
        if isinstance(self.alpha, float | int) and self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.eps <= 0:
            raise ValueError("eps must be > 0")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.sf_r < 0:
            raise ValueError("sf_r must be >= 0")
        if self.algorithm == "mars-approx":
            b1 = self.beta1 if isinstance(self.beta1, float | int) else None
            if b1 is not None and b1 >= 1.0:
                raise ValueError("mars-approx requires beta1 < 1")
        if self.algorithm in ("ademamix", "accel-adam-avg") and self.beta3 is None:
            raise ValueError(f"{self.algorithm} requires beta3")
        if self.algorithm == "accel-adam-avg" and self.beta3 is not None \
                and not isinstance(self.beta3, float | int):
            raise ValueError("accel-adam-avg takes a constant beta3 "
                             "(the numerator mixing weight)")
        if self.accel_coeffs is not None:
            if self.algorithm != "accel-sgd":
                raise ValueError("accel_coeffs only applies to accel-sgd")
            if len(self.accel_coeffs) != 3:
                raise ValueError("accel_coeffs must be (beta_a, eta_a, alpha_a)")

    @property
    def bias_corrected(self) -> bool:
        if self.bias_correction is None:
            return _BIAS_DEFAULT.get(self.algorithm, False)
        return self.bias_correction


@dataclass
class OptimizerState:
    """Mutable per-run state: step counter, parameters, and named buffers."""

    algorithm: str
    t: int
    w: np.ndarray
    buffers: dict[str, np.ndarray]


@dataclass(frozen=True)
class StepReport:
    eval_params: np.ndarray   # live view of the evaluation parameters
    update_norm: float


def _lr(x, t: int) -> float:
    return lr_at(x, t) if isinstance(x, LearningRateSchedule) else float(x)


def _mom(x, t: int) -> float:
    return momentum_at(x, t) if isinstance(x, MomentumSchedule) else float(x)


def _alp(x, t: int) -> float:
    return alpha_at(x, t) if isinstance(x, AlphaSchedule) else float(x)


def init_state(config: OptimizerConfig, w0) -> OptimizerState:
    """Allocate exactly the buffers the algorithm needs.

    Momentum and second-moment buffers start at zero; the schedule-free z, x
    sequences and the running average start at w0.
    """
    w0 = np.ascontiguousarray(np.asarray(w0, dtype=float).ravel())
    if w0.size < 1:
        raise ValueError("w0 must be non-empty")
    if not np.isfinite(w0).all():
        raise ValueError("w0 must be finite")
    buffers = {}
    for name in _BUFFER_MAP[config.algorithm]:
        if name in ("z", "x", "w_avg"):
            buffers[name] = w0.copy()
        else:
            buffers[name] = np.zeros_like(w0)
    return OptimizerState(algorithm=config.algorithm, t=0, w=w0.copy(),
                          buffers=buffers)


def eval_point(state: OptimizerState) -> np.ndarray:
    """Parameters the algorithm designates for evaluation."""
    if state.algorithm in _SCHEDULE_FREE:
        return state.buffers["x"]
    if state.algorithm == "accel-adam-avg":
        return state.buffers["w_avg"]
    return state.w


def query_point(state: OptimizerState, config: OptimizerConfig) -> np.ndarray:
    """Point at which the next gradient must be evaluated."""
    if state.algorithm in _SCHEDULE_FREE:
        beta = float(config.beta1)
        return (1.0 - beta) * state.buffers["z"] + beta * state.buffers["x"]
    return state.w


def accel_coefficients_at(config: OptimizerConfig, t: int) -> tuple[float, float, float]:
    """(beta_a, eta_a, alpha_a) for an accel-sgd config at step t."""
    if config.accel_coeffs is not None:
        ba, ea, aa = config.accel_coeffs
        if t > len(ba):
            raise ValueError(f"accel_coeffs cover {len(ba)} steps, got step {t}")
        return float(ba[t - 1]), float(ea[t - 1]), float(aa[t - 1])
    if config.accel_from_sf:
        beta_sf = float(config.beta1)
        gam = _lr(config.lr, t)
        c_t = schedule_free_c(config.sf_r, t)
        c_prev = 1.0 if t == 1 else schedule_free_c(config.sf_r, t - 1)
        return 1.0 - c_prev, gam * beta_sf * c_t, gam * (1.0 - beta_sf)
    return _mom(config.beta1, t), _lr(config.lr, t), _alp(config.alpha, t)


def momentum_coefficient(config: OptimizerConfig, t: int) -> float:
    """The momentum coefficient in effect at step t (for run records).

    For the schedule-free algorithms this is the implied beta_a,t = 1 - c_t;
    for accel-adam-avg it is the numerator mixing weight beta3.
    """
    if config.algorithm == "accel-sgd":
        return accel_coefficients_at(config, t)[0]
    if config.algorithm in _SCHEDULE_FREE:
        return 1.0 - schedule_free_c(config.sf_r, t)
    if config.algorithm == "accel-adam-avg":
        return float(config.beta3)
    return _mom(config.beta1, t)


def step_accel_sgd(state: OptimizerState, g, t: int, beta_a: float,
                   eta_a: float, alpha_a: float) -> OptimizerState:
    """One general accelerated-SGD step with explicit coefficients.

    m <- beta_a m + g;  w <- w - eta_a m - alpha_a g.  alpha_a = 0 recovers
    SGD with momentum; beta_a = 0 and alpha_a = 0 recover plain SGD.
    """
    if t != state.t + 1:
        raise ValueError(f"expected step {state.t + 1}, got {t}")
    g = _check_gradient(state, g, t)
    norm = K.accel_sgd_step(state.w, state.buffers["m"], g, beta_a, eta_a, alpha_a)
    if not np.isfinite(norm):
        raise NonFiniteUpdateError(t, "update")
    state.t = t
    return state


def _check_gradient(state: OptimizerState, g, t: int) -> np.ndarray:
    g = np.asarray(g, dtype=float).ravel()
    if g.size != state.w.size:
        raise ValueError(f"gradient dim {g.size} != parameter dim {state.w.size}")
    if not np.isfinite(g).all():
        raise NonFiniteUpdateError(t, "gradient")
    return g


def _bias_denominators(config: OptimizerConfig, b1: float, t: int) -> tuple[float, float]:
    if not config.bias_corrected:
        return 1.0, 1.0
    return 1.0 - b1 ** t, 1.0 - config.beta2 ** t


def _step_sgd_momentum(state, g, cfg, t):
    return K.accel_sgd_step(state.w, state.buffers["m"], g,
                            _mom(cfg.beta1, t), _lr(cfg.lr, t), 0.0)


def _step_accel_sgd(state, g, cfg, t):
    beta_a, eta_a, alpha_a = accel_coefficients_at(cfg, t)
    return K.accel_sgd_step(state.w, state.buffers["m"], g, beta_a, eta_a, alpha_a)


def _step_schedule_free_sgd(state, g, cfg, t):
    y = query_point(state, cfg)
    norm = K.schedule_free_sgd_step(
        state.buffers["z"], state.buffers["x"], y, g, _lr(cfg.lr, t),
        schedule_free_c(cfg.sf_r, t), cfg.weight_decay)
    state.w[:] = y   # record the point the gradient was taken at
    return norm


def _step_schedule_free_adamw(state, g, cfg, t):
    y = query_point(state, cfg)
    bc2 = 1.0 - cfg.beta2 ** t if cfg.bias_corrected else 1.0
    norm = K.schedule_free_adamw_step(
        state.buffers["z"], state.buffers["x"], y, g, state.buffers["v"],
        _lr(cfg.lr, t), schedule_free_c(cfg.sf_r, t), cfg.beta2, cfg.eps,
        cfg.weight_decay, bc2)
    state.w[:] = y
    return norm


def _step_adamw(state, g, cfg, t):
    b1 = _mom(cfg.beta1, t)
    bc1, bc2 = _bias_denominators(cfg, b1, t)
    return K.adamw_step(state.w, state.buffers["m"], state.buffers["v"], g,
                        _lr(cfg.lr, t), b1, cfg.beta2, cfg.eps,
                        cfg.weight_decay, bc1, bc2)


def _step_laprop(state, g, cfg, t):
    b1 = _mom(cfg.beta1, t)
    bc1, bc2 = _bias_denominators(cfg, b1, t)
    return K.laprop_step(state.w, state.buffers["m"], state.buffers["v"], g,
                         _lr(cfg.lr, t), b1, cfg.beta2, cfg.eps,
                         cfg.weight_decay, bc1, bc2)


def _step_lion(state, g, cfg, t):
    return K.lion_step(state.w, state.buffers["m"], g, _lr(cfg.lr, t),
                       _mom(cfg.beta1, t), cfg.beta2, cfg.weight_decay)


def _step_mars(state, g, cfg, t):
    b1 = _mom(cfg.beta1, t)
    if b1 >= 1.0:
        raise ValueError("mars-approx requires beta1 < 1")
    bc1, bc2 = _bias_denominators(cfg, b1, t)
    cbuf = np.empty_like(g)
    return K.mars_step(state.w, state.buffers["m"], state.buffers["v"],
                       state.buffers["g_prev"], g, cbuf, _lr(cfg.lr, t), b1,
                       cfg.beta2, cfg.gamma, cfg.eps, cfg.weight_decay,
                       cfg.mars_clip, bc1, bc2)


def _step_ademamix(state, g, cfg, t):
    b1 = _mom(cfg.beta1, t)
    bc1, bc2 = _bias_denominators(cfg, b1, t)
    return K.ademamix_step(state.w, state.buffers["m1"], state.buffers["m2"],
                           state.buffers["v"], g, _lr(cfg.lr, t), b1,
                           cfg.beta2, _mom(cfg.beta3, t), _alp(cfg.alpha, t),
                           cfg.eps, cfg.weight_decay, bc1, bc2)


def _step_simplified_ademamix(state, g, cfg, t):
    bc2 = 1.0 - cfg.beta2 ** t if cfg.bias_corrected else 1.0
    return K.simplified_ademamix_step(
        state.w, state.buffers["m1"], state.buffers["v"], g, _lr(cfg.lr, t),
        _mom(cfg.beta1, t), cfg.beta2, _alp(cfg.alpha, t), cfg.eps,
        cfg.weight_decay, bc2)


def _step_accel_adam_avg(state, g, cfg, t):
    bc2 = 1.0 - cfg.beta2 ** t if cfg.bias_corrected else 1.0
    return K.accel_adam_avg_step(
        state.w, state.buffers["m"], state.buffers["v"],
        state.buffers["w_avg"], g, _lr(cfg.lr, t), _mom(cfg.beta1, t),
        cfg.beta2, float(cfg.beta3), averaging_coeff(cfg.averaging, t),
        cfg.eps, cfg.weight_decay, bc2)


_STEP_FNS = {
    "sgd-momentum": _step_sgd_momentum,
    "accel-sgd": _step_accel_sgd,
    "schedule-free-sgd": _step_schedule_free_sgd,
    "schedule-free-adamw": _step_schedule_free_adamw,
    "adamw": _step_adamw,
    "laprop": _step_laprop,
    "lion": _step_lion,
    "mars-approx": _step_mars,
    "ademamix": _step_ademamix,
    "simplified-ademamix": _step_simplified_ademamix,
    "accel-adam-avg": _step_accel_adam_avg,
}


def step(state: OptimizerState, g, config: OptimizerConfig) -> StepReport:
    """Advance the state by one step using the gradient g.

    For schedule-free algorithms g must have been evaluated at
    ``query_point(state, config)``; for everything else at ``state.w``.
    Raises NonFiniteUpdateError if the gradient or the resulting update is
    not finite.
    """
    if config.algorithm != state.algorithm:
        raise ValueError(f"state is for {state.algorithm!r}, config for "
                         f"{config.algorithm!r}")
    t = state.t + 1
    g = _check_gradient(state, g, t)
    norm = _STEP_FNS[config.algorithm](state, g, config, t)
    if not np.isfinite(norm):
        raise NonFiniteUpdateError(t, "update")
    state.t = t
    return StepReport(eval_params=eval_point(state), update_norm=float(norm))
