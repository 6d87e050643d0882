"""Coefficient mappings onto the general accelerated-SGD form, and the
numerical trajectory comparator that certifies them.

The general form is

    m_t = beta_a,t m_{t-1} + g_t
    w_{t+1} = w_t - eta_a,t m_t - alpha_a,t g_t

with the gradient g_t taken at w_t.  ``map_schedule_free`` and ``map_legacy``
produce the per-step (beta_a, eta_a, alpha_a) triple under which a method's
gradient-query trajectory coincides with the general form; every mapping here
is certified by a dual simulation (original recursion vs mapped general form
on an identical gradient stream) rather than trusted symbolically.

Step indexing is 1-based: arrays hold the coefficient applied at steps
1..T, and trajectories have T+1 rows (the initial point plus one per step).
"""

from dataclasses import dataclass

import numpy as np

from .optimizers import (OptimizerConfig, eval_point, init_state, query_point,
                         step, step_accel_sgd)
from .problems import Problem, quadratic, sample_gradient
from .rng import StreamPool, stream
from .schedules import MomentumSchedule, momentum_seq

LEGACY_KINDS = ("agnes", "asgd-jain", "mass", "nesterov-vaswani")


class SingularMappingError(ValueError):
    """The requested parameters make a mapping's carrier degenerate."""


@dataclass(frozen=True)
class AccelCoefficients:
    """Per-step coefficients of the general accelerated-SGD form."""

    beta_a: np.ndarray
    eta_a: np.ndarray
    alpha_a: np.ndarray

    def __post_init__(self):
        for name in ("beta_a", "eta_a", "alpha_a"):
            arr = np.asarray(getattr(self, name), dtype=float).ravel()
            object.__setattr__(self, name, arr)
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} must be finite")
        if not (self.beta_a.size == self.eta_a.size == self.alpha_a.size):
            raise ValueError("coefficient sequences must share one length")
        if np.any(self.beta_a < 0) or np.any(self.beta_a > 1):
            raise ValueError("beta_a must lie in [0, 1]")
        if np.any(self.eta_a < 0) or np.any(self.alpha_a < 0):
            raise ValueError("eta_a and alpha_a must be >= 0")

    @property
    def steps(self) -> int:
        return self.beta_a.size


@dataclass(frozen=True)
class TrajectoryDiff:
    """Worst-case gap between two trajectories of equal shape.

    The relative gap at a step is the max absolute coordinate gap divided by
    the larger of the two iterates' max coordinate magnitudes.
    ``first_divergence_step`` is the first step whose relative gap exceeded
    the tolerance used in the comparison, or None if none did.
    """

    max_abs_gap: float
    max_rel_gap: float
    first_divergence_step: int | None

    @property
    def ok(self) -> bool:
        return self.first_divergence_step is None


def compare_trajectories(run_a, run_b, tolerance: float) -> TrajectoryDiff:
    """Per-step comparison of two trajectories (rows are iterates)."""
    a = np.atleast_2d(np.asarray(run_a, dtype=float))
    b = np.atleast_2d(np.asarray(run_b, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"trajectory shapes differ: {a.shape} vs {b.shape}")
    if tolerance <= 0:
        raise ValueError("tolerance must be > 0")
    abs_gap = np.max(np.abs(a - b), axis=1)
    scale = np.maximum(np.max(np.abs(a), axis=1), np.max(np.abs(b), axis=1))
    rel_gap = abs_gap / np.maximum(scale, 1e-300)
    first = None
    over = np.nonzero(~(rel_gap <= tolerance))[0]   # catches NaN too
    if over.size:
        first = int(over[0])
    return TrajectoryDiff(max_abs_gap=float(np.max(abs_gap)),
                          max_rel_gap=float(np.max(rel_gap)),
                          first_divergence_step=first)


# ---------------------------------------------------------------------------
# Schedule-Free SGD
# ---------------------------------------------------------------------------

def map_schedule_free(beta: float, gamma: float, c) -> AccelCoefficients:
    """General-form coefficients of Schedule-Free SGD's query sequence y.

    ``c`` holds the averaging weights c_1..c_T.  Step t of the general form
    consumes g(y_{t-1}) and uses beta_a,t = 1 - c_{t-1} (with c_0 := 1, which
    is irrelevant because the momentum buffer starts at zero),
    eta_a,t = gamma * beta * c_t and alpha_a,t = gamma * (1 - beta).
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    c = np.asarray(c, dtype=float).ravel()
    if np.any(c <= 0) or np.any(c > 1):
        raise ValueError("c_t must lie in (0, 1]")
    c_prev = np.concatenate([[1.0], c[:-1]])
    return AccelCoefficients(beta_a=1.0 - c_prev,
                             eta_a=gamma * beta * c,
                             alpha_a=np.full(c.size, gamma * (1.0 - beta)))


def reconstruct_sf_average(y_trajectory, beta: float, c) -> np.ndarray:
    """Rebuild Schedule-Free's evaluation sequence x from its y sequence.

    x_{t+1} = [(1-c_{t+1})(1-beta) x_t + c_{t+1} y_{t+1}]
              / [(1-c_{t+1})(1-beta) + c_{t+1}],  with x_0 = y_0.

    With beta = 0 this is a plain running average of y; with constant c it is
    an exponential moving average.
    """
    y = np.atleast_2d(np.asarray(y_trajectory, dtype=float))
    c = np.asarray(c, dtype=float).ravel()
    if y.shape[0] != c.size + 1:
        raise ValueError(f"need c_1..c_T for a T+1-row trajectory; got "
                         f"{c.size} weights for {y.shape[0]} rows")
    x = np.empty_like(y)
    x[0] = y[0]
    for t in range(1, y.shape[0]):
        ct = c[t - 1]
        mass = (1.0 - ct) * (1.0 - beta)
        den = mass + ct
        if den <= 0:
            raise ValueError(f"degenerate averaging weight at step {t}: "
                             f"(1-c)(1-beta)+c = {den}")
        x[t] = (mass * x[t - 1] + ct * y[t]) / den
    return x


# ---------------------------------------------------------------------------
# Prior accelerated-SGD methods
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LegacyForm:
    """One prior accelerated-SGD method in its original parameterisation.

    Parameters by kind (scalars, or per-step arrays where noted):

    * ``agnes``            alpha, eta, rho (rho may be a length-T array)
    * ``asgd-jain``        alpha, beta, gamma, delta
    * ``mass``             gamma, eta1, eta2
    * ``nesterov-vaswani`` eta, alpha, beta, gamma (alpha may be length T+1,
                           beta and gamma length T)
    """

    kind: str
    params: dict

    def __post_init__(self):
        if self.kind not in LEGACY_KINDS:
            raise ValueError(f"unknown legacy form {self.kind!r}")
        for key, val in self.params.items():
            arr = np.asarray(val, dtype=float)
            if not np.isfinite(arr).all():
                raise ValueError(f"{self.kind} parameter {key} must be finite")


def _per_step(value, total: int, offset: int = 0) -> np.ndarray:
    arr = np.asarray(value, dtype=float).ravel()
    if arr.size == 1:
        return np.full(total + offset, arr[0])
    if arr.size != total + offset:
        raise ValueError(f"sequence must have length {total + offset}, got {arr.size}")
    return arr


_SINGULAR_MARGIN = 1e-12


def map_legacy(form: LegacyForm, horizon: int) -> AccelCoefficients:
    """General-form coefficients for a prior method over ``horizon`` steps.

    Raises SingularMappingError when the momentum carrier that certifies the
    rewrite is degenerate (asgd-jain: gamma == delta; mass: eta1*gamma ==
    eta2; nesterov-vaswani: gamma_k == 1).
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    p = form.params
    if form.kind == "agnes":
        # carrier -v_{n+1}/rho_n: beta_a,n = rho_{n-1}, eta_a,n = alpha rho_n
        rho = _per_step(p["rho"], horizon)
        beta_a = np.concatenate([[rho[0]], rho[:-1]])
        return AccelCoefficients(beta_a=beta_a, eta_a=p["alpha"] * rho,
                                 alpha_a=np.full(horizon, p["eta"]))
    if form.kind == "asgd-jain":
        a, b, gm, dl = (float(p[k]) for k in ("alpha", "beta", "gamma", "delta"))
        if abs(gm - dl) <= _SINGULAR_MARGIN * max(1.0, abs(gm), abs(dl)):
            raise SingularMappingError(
                "asgd-jain mapping is singular: gamma == delta makes the "
                "momentum carrier (x_j - v_j)/(gamma - delta) degenerate")
        if gm < dl:
            raise SingularMappingError(
                "asgd-jain mapping requires the long step gamma > delta")
        return AccelCoefficients(
            beta_a=np.full(horizon, (1.0 - b) * a),
            eta_a=np.full(horizon, (1.0 - a) * (gm - dl)),
            alpha_a=np.full(horizon, dl))
    if form.kind == "mass":
        gm, e1, e2 = (float(p[k]) for k in ("gamma", "eta1", "eta2"))
        den = e1 * gm - e2
        if abs(den) <= _SINGULAR_MARGIN * max(1.0, abs(e1 * gm), abs(e2)):
            raise SingularMappingError(
                "mass mapping is singular: eta1*gamma == eta2 makes the "
                "momentum carrier (w_t - u_t)/(eta1*gamma - eta2) degenerate")
        if den < 0:
            raise SingularMappingError(
                "mass mapping requires eta1*gamma > eta2")
        return AccelCoefficients(beta_a=np.full(horizon, gm),
                                 eta_a=np.full(horizon, den),
                                 alpha_a=np.full(horizon, e1))
    # nesterov-vaswani
    eta = float(p["eta"])
    alpha = _per_step(p["alpha"], horizon, offset=1)     # needs alpha_{k+1}
    beta = _per_step(p["beta"], horizon)
    gamma = _per_step(p["gamma"], horizon)
    if np.any(gamma - 1.0 <= _SINGULAR_MARGIN * np.maximum(1.0, np.abs(gamma))):
        raise SingularMappingError(
            "nesterov-vaswani mapping is singular: gamma_k must exceed 1 "
            "(the gradient weight eta*(gamma_k - 1) vanishes at gamma_k = 1)")
    gamma_prev = np.concatenate([[gamma[0]], gamma[:-1]])
    return AccelCoefficients(
        beta_a=beta * (1.0 - alpha[:horizon]) * (gamma_prev - 1.0) / (gamma - 1.0),
        eta_a=alpha[1:horizon + 1] * eta * (gamma - 1.0),
        alpha_a=np.full(horizon, eta))


def simulate_accel(grad_fn, w0, coeffs: AccelCoefficients) -> np.ndarray:
    """Run the general form; returns the (T+1, d) trajectory of w.

    ``grad_fn(w, t)`` must return the stochastic gradient at w for 1-based
    step t (keyed noise makes dual simulations share their streams).
    """
    config = OptimizerConfig(algorithm="accel-sgd", lr=1.0)
    state = init_state(config, w0)
    traj = np.empty((coeffs.steps + 1, state.w.size))
    traj[0] = state.w
    for t in range(1, coeffs.steps + 1):
        g = grad_fn(state.w, t)
        step_accel_sgd(state, g, t, float(coeffs.beta_a[t - 1]),
                       float(coeffs.eta_a[t - 1]), float(coeffs.alpha_a[t - 1]))
        traj[t] = state.w
    return traj


def simulate_legacy(form: LegacyForm, grad_fn, w0, steps: int) -> np.ndarray:
    """Run a prior method in its original form; returns its (T+1, d)
    gradient-query trajectory (x'_n, y_j, u_t, or zeta_k by kind)."""
    w0 = np.asarray(w0, dtype=float).ravel()
    p = form.params
    traj = np.empty((steps + 1, w0.size))
    if form.kind == "agnes":
        alpha, eta = float(p["alpha"]), float(p["eta"])
        rho = _per_step(p["rho"], steps)
        x, v = w0.copy(), np.zeros_like(w0)
        for n in range(1, steps + 1):
            xq = x + alpha * v
            traj[n - 1] = xq
            g = grad_fn(xq, n)
            x = xq - eta * g
            v = rho[n - 1] * (v - g)
        traj[steps] = x + alpha * v
        return traj
    if form.kind == "asgd-jain":
        a, b, gm, dl = (float(p[k]) for k in ("alpha", "beta", "gamma", "delta"))
        x, v = w0.copy(), w0.copy()
        for j in range(1, steps + 1):
            y = a * x + (1.0 - a) * v
            traj[j - 1] = y
            g = grad_fn(y, j)
            x_new = y - dl * g
            z = b * y + (1.0 - b) * v
            v = z - gm * g
            x = x_new
        traj[steps] = a * x + (1.0 - a) * v
        return traj
    if form.kind == "mass":
        gm, e1, e2 = (float(p[k]) for k in ("gamma", "eta1", "eta2"))
        w, u = w0.copy(), w0.copy()
        traj[0] = u
        for t in range(1, steps + 1):
            g = grad_fn(u, t)
            w_new = u - e1 * g
            u = (1.0 + gm) * w_new - gm * w + e2 * g
            w = w_new
            traj[t] = u
        return traj
    # nesterov-vaswani
    eta = float(p["eta"])
    alpha = _per_step(p["alpha"], steps, offset=1)
    beta = _per_step(p["beta"], steps)
    gamma = _per_step(p["gamma"], steps)
    w, v = w0.copy(), w0.copy()
    for k in range(1, steps + 1):
        zeta = alpha[k - 1] * v + (1.0 - alpha[k - 1]) * w
        traj[k - 1] = zeta
        g = grad_fn(zeta, k)
        w_new = zeta - eta * g
        v = beta[k - 1] * v + (1.0 - beta[k - 1]) * zeta - gamma[k - 1] * eta * g
        w = w_new
    traj[steps] = alpha[steps] * v + (1.0 - alpha[steps]) * w
    return traj


# ---------------------------------------------------------------------------
# AdEMAMix <-> Simplified-AdEMAMix
# ---------------------------------------------------------------------------

def map_ademamix_to_simplified(beta3: float, alpha: float,
                               eta: float) -> tuple[float, float, float]:
    """Parameters under which Simplified-AdEMAMix reproduces AdEMAMix.

    Valid for the AdEMAMix restriction beta1 = 0, constant beta3, bias
    correction off.  Returns (beta1', alpha', eta') = (beta3,
    1/(alpha (1-beta3)), eta alpha (1-beta3)): the slow EMA m2 equals
    (1-beta3) times the theory-style buffer m1', so the two update numerators
    are proportional with the learning rate absorbing the scale.
    """
    if not 0.0 < beta3 < 1.0:
        raise ValueError("beta3 must lie strictly in (0, 1)")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    return beta3, 1.0 / (alpha * (1.0 - beta3)), eta * alpha * (1.0 - beta3)


def map_simplified_to_ademamix(beta1: float, alpha: float,
                               eta: float) -> tuple[float, float, float]:
    """Inverse of map_ademamix_to_simplified."""
    if not 0.0 < beta1 < 1.0:
        raise ValueError("beta1 must lie strictly in (0, 1)")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    return beta1, 1.0 / (alpha * (1.0 - beta1)), eta * alpha


# ---------------------------------------------------------------------------
# Dual-simulation checks
# ---------------------------------------------------------------------------

def gradient_fn(problem: Problem, seed: int):
    """Step-keyed stochastic gradient closure (dual simulations that share
    (problem, seed) see identical noise at identical steps)."""
    pool = StreamPool()

    def grad(w, t: int):
        return sample_gradient(problem, w, pool.use(seed, t, "grad")).gradient
    return grad


def default_w0(problem: Problem, seed: int, scale: float = 1.0) -> np.ndarray:
    return scale * stream(seed, 0, "init").standard_normal(problem.dim)


def optimizer_trajectory(config: OptimizerConfig, problem: Problem, steps: int,
                         seed: int, record: str = "w",
                         w0=None) -> np.ndarray:
    """Run one optimizer and return its (T+1, d) trajectory.

    ``record`` selects what is logged: the current parameters ("w"), the
    evaluation point ("eval"), or the gradient-query point ("query", which
    for schedule-free algorithms is the y sequence).
    """
    if record not in ("w", "eval", "query"):
        raise ValueError(f"unknown record mode {record!r}")
    state = init_state(config, default_w0(problem, seed) if w0 is None else w0)
    grad = gradient_fn(problem, seed)

    def snap():
        if record == "eval":
            return eval_point(state).copy()
        if record == "query":
            return query_point(state, config).copy()
        return state.w.copy()

    traj = np.empty((steps + 1, state.w.size))
    traj[0] = snap()
    for t in range(1, steps + 1):
        g = grad(query_point(state, config), t)
        step(state, g, config)
        traj[t] = snap()
    return traj


def _default_noisy_quadratic(dim: int = 10, sigma: float = 0.3) -> Problem:
    return quadratic(np.linspace(0.1, 1.0, dim), noise="additive-gaussian",
                     noise_sigma=sigma)


def _default_quadratic(dim: int = 5) -> Problem:
    return quadratic(np.linspace(0.2, 1.0, dim))


def check_schedule_free(beta: float = 0.9, gamma: float = 0.05, r: float = 0.0,
                        steps: int = 10_000, seed: int = 0,
                        tolerance: float = 1e-9, problem: Problem | None = None,
                        ) -> list[tuple[str, TrajectoryDiff]]:
    """Schedule-Free SGD vs its mapped general form plus reconstruction.

    Runs Schedule-Free SGD directly, runs the mapped accelerated-SGD
    recursion on the same gradient stream, rebuilds the average, and
    compares both the query sequence y and the evaluation sequence x.
    """
    problem = problem or _default_noisy_quadratic()
    config = OptimizerConfig(algorithm="schedule-free-sgd", lr=gamma,
                             beta1=beta, sf_r=r)
    state = init_state(config, default_w0(problem, seed))
    grad = gradient_fn(problem, seed)
    dim = state.w.size
    y_direct = np.empty((steps + 1, dim))
    x_direct = np.empty((steps + 1, dim))
    y_direct[0] = query_point(state, config)
    x_direct[0] = state.buffers["x"]
    for t in range(1, steps + 1):
        g = grad(query_point(state, config), t)
        step(state, g, config)
        y_direct[t] = query_point(state, config)
        x_direct[t] = state.buffers["x"]

    c = momentum_seq(MomentumSchedule(kind="schedule-free-c", r=r), steps)
    coeffs = map_schedule_free(beta, gamma, c)
    y_mapped = simulate_accel(grad, y_direct[0], coeffs)
    x_mapped = reconstruct_sf_average(y_mapped, beta, c)
    out = [("y", compare_trajectories(y_direct, y_mapped, tolerance))]
    if beta < 1.0:
        out.append(("x", compare_trajectories(x_direct, x_mapped, tolerance)))
    return out


_LEGACY_DEFAULTS = {
    "agnes": {"alpha": 0.05, "eta": 0.08, "rho": 0.8},
    "asgd-jain": {"alpha": 0.6, "beta": 0.3, "gamma": 0.3, "delta": 0.05},
    "mass": {"gamma": 0.7, "eta1": 0.1, "eta2": 0.03},
    "nesterov-vaswani": {"eta": 0.08, "alpha": 0.4, "beta": 0.85, "gamma": 1.6},
}


def check_legacy(kind: str, params: dict | None = None, steps: int = 500,
                 seed: int = 0, tolerance: float = 1e-9,
                 problem: Problem | None = None,
                 ) -> list[tuple[str, TrajectoryDiff]]:
    """Dual simulation of one prior method against its mapped general form."""
    form = LegacyForm(kind=kind, params={**_LEGACY_DEFAULTS[kind], **(params or {})})
    problem = problem or _default_quadratic()
    grad = gradient_fn(problem, seed)
    w0 = default_w0(problem, seed)
    original = simulate_legacy(form, grad, w0, steps)
    mapped = simulate_accel(grad, w0, map_legacy(form, steps))
    return [(kind, compare_trajectories(original, mapped, tolerance))]


def check_ademamix_simplified(beta3: float = 0.999, alpha: float = 8.0,
                              eta: float = 1e-3, beta2: float = 0.999,
                              steps: int = 500, seed: int = 0,
                              tolerance: float = 1e-10,
                              problem: Problem | None = None,
                              ) -> list[tuple[str, TrajectoryDiff]]:
    """AdEMAMix (beta1 = 0, constant beta3) vs the mapped Simplified form."""
    problem = problem or _default_noisy_quadratic()
    b1p, ap, ep = map_ademamix_to_simplified(beta3, alpha, eta)
    cfg_a = OptimizerConfig(algorithm="ademamix", lr=eta, beta1=0.0,
                            beta2=beta2, beta3=beta3, alpha=alpha,
                            bias_correction=False)
    cfg_s = OptimizerConfig(algorithm="simplified-ademamix", lr=ep, beta1=b1p,
                            beta2=beta2, alpha=ap, bias_correction=False)
    ta = optimizer_trajectory(cfg_a, problem, steps, seed)
    ts = optimizer_trajectory(cfg_s, problem, steps, seed)
    return [("w", compare_trajectories(ta, ts, tolerance))]


def mars_rewrite_residual(gamma: float = 0.025, beta1: float = 0.9,
                          beta2: float = 0.999, lr: float = 1e-3,
                          steps: int = 500, seed: int = 0,
                          problem: Problem | None = None) -> float:
    """Max residual of the rewritten MARS momentum recursion.

    Checks, at every step of a real MARS-Approx run, that
    mhat_t = m_t - gamma g_t obeys
    mhat_t = beta1 mhat_{t-1} + (1-beta1)(1-gamma) g_t
    (coordinatewise, relative to max(1, |mhat_t|)).
    """
    problem = problem or _default_noisy_quadratic()
    config = OptimizerConfig(algorithm="mars-approx", lr=lr, beta1=beta1,
                             beta2=beta2, gamma=gamma)
    state = init_state(config, default_w0(problem, seed))
    grad = gradient_fn(problem, seed)
    mhat_prev = np.zeros_like(state.w)
    worst = 0.0
    for t in range(1, steps + 1):
        g = grad(state.w, t)
        step(state, g, config)
        mhat = state.buffers["m"] - gamma * g
        predicted = beta1 * mhat_prev + (1.0 - beta1) * (1.0 - gamma) * g
        resid = np.abs(mhat - predicted) / np.maximum(1.0, np.abs(mhat))
        worst = max(worst, float(np.max(resid)))
        mhat_prev = mhat
    return worst


def check_mars_rewrite(gamma: float = 0.025, steps: int = 500, seed: int = 0,
                       tolerance: float = 1e-12,
                       **kwargs) -> list[tuple[str, TrajectoryDiff]]:
    worst = mars_rewrite_residual(gamma=gamma, steps=steps, seed=seed, **kwargs)
    diff = TrajectoryDiff(max_abs_gap=worst, max_rel_gap=worst,
                          first_divergence_step=None if worst <= tolerance else 1)
    return [("mhat-recursion", diff)]


NAMED_CHECKS = ("schedule-free", "agnes", "asgd-jain", "mass", "nesterov",
                "ademamix-simplified", "mars-rewrite")


def run_named_check(name: str, params: dict | None = None,
                    horizon: int | None = None, tolerance: float | None = None,
                    seed: int = 0) -> list[tuple[str, TrajectoryDiff]]:
    """Entry point behind the equiv-check CLI subcommand."""
    params = dict(params or {})
    if name not in NAMED_CHECKS:
        raise ValueError(f"unknown mapping {name!r}; choose from {NAMED_CHECKS}")
    if name == "schedule-free":
        return check_schedule_free(steps=horizon or 10_000, seed=seed,
                                   tolerance=tolerance or 1e-9, **params)
    if name == "ademamix-simplified":
        return check_ademamix_simplified(steps=horizon or 500, seed=seed,
                                         tolerance=tolerance or 1e-10, **params)
    if name == "mars-rewrite":
        return check_mars_rewrite(steps=horizon or 500, seed=seed,
                                  tolerance=tolerance or 1e-12, **params)
    kind = "nesterov-vaswani" if name == "nesterov" else name
    return check_legacy(kind, params=params, steps=horizon or 500, seed=seed,
                        tolerance=tolerance or 1e-9)
