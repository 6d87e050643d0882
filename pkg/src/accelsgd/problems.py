"""Synthetic objectives with analytic gradients.

Four problem kinds serve as the optimizer test bed:

* ``quadratic`` -- f(w) = 0.5 * w^T diag(h) w, optionally with additive
  Gaussian gradient noise (the classic noisy quadratic).
* ``noisy-least-squares`` -- mean squared residual on a Gaussian design with
  targets from a planted weight vector plus label noise; minibatch sampling
  makes the gradient stochastic.
* ``logistic`` -- binary logistic regression on Gaussian features with
  planted labels.
* ``mlp`` -- squared loss of a 2-layer tanh perceptron against a noisy
  teacher network, with hand-written backprop.

Parameter vectors are flat 1-D float64 arrays throughout.  All problems are
immutable after construction, and ``sample_gradient`` is a pure function of
(problem, w, generator state), so runs are reproducible bit for bit.
"""

from dataclasses import dataclass, field

import numpy as np

from .rng import stream

PROBLEM_KINDS = ("quadratic", "noisy-least-squares", "logistic", "mlp")
NOISE_MODELS = ("none", "minibatch", "additive-gaussian")


@dataclass(frozen=True)
class Problem:
    kind: str
    dim: int
    noise: str = "none"
    batch_size: int = 0          # minibatch only
    noise_sigma: float = 0.0     # additive-gaussian only
    data: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in PROBLEM_KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.noise not in NOISE_MODELS:
            raise ValueError(f"unknown noise model {self.noise!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.noise == "minibatch":
            n = self.n_samples
            if n == 0:
                raise ValueError(f"{self.kind} has no dataset to minibatch")
            if not 1 <= self.batch_size <= n:
                raise ValueError(f"batch_size must lie in [1, {n}]")
        if self.noise == "additive-gaussian" and self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    @property
    def n_samples(self) -> int:
        if "X" in self.data:
            return self.data["X"].shape[0]
        return 0


@dataclass(frozen=True)
class GradSample:
    gradient: np.ndarray
    loss: float
    batch_indices: np.ndarray    # empty for deterministic gradients


def quadratic(hess_diag, noise: str = "none", noise_sigma: float = 0.0) -> Problem:
    """f(w) = 0.5 * sum_i h_i w_i^2 with h_i >= 0."""
    h = np.asarray(hess_diag, dtype=float).ravel()
    if np.any(h < 0):
        raise ValueError("quadratic Hessian diagonal must be >= 0")
    if noise == "minibatch":
        raise ValueError("quadratic has no dataset; use additive-gaussian noise")
    return Problem(kind="quadratic", dim=h.size, noise=noise,
                   noise_sigma=noise_sigma, data={"h": h})


def noisy_least_squares(n: int, d: int, batch_size: int | None = None,
                        label_noise: float = 0.1, seed: int = 0) -> Problem:
    """Least squares on a Gaussian design: y = X w* + label_noise * xi.

    The objective is the full-batch mean 0.5/n * ||X w - y||^2; minibatches
    of ``batch_size`` rows drawn with replacement give an unbiased gradient.
    ``batch_size`` of None (or n) means full-batch, i.e. a noise-free oracle.
    """
    rng = stream(seed, 0, "problem-ls")
    X = rng.standard_normal((n, d))
    w_star = rng.standard_normal(d)
    y = X @ w_star + label_noise * rng.standard_normal(n)
    noise = "minibatch" if batch_size is not None and batch_size < n else "none"
    return Problem(kind="noisy-least-squares", dim=d, noise=noise,
                   batch_size=int(batch_size or n) if noise == "minibatch" else 0,
                   data={"X": X, "y": y, "w_star": w_star})


def logistic(n: int, d: int, batch_size: int | None = None, seed: int = 0) -> Problem:
    """Binary logistic regression with labels planted from a random direction."""
    rng = stream(seed, 0, "problem-logistic")
    X = rng.standard_normal((n, d))
    w_star = rng.standard_normal(d) / np.sqrt(d)
    p = 1.0 / (1.0 + np.exp(-X @ w_star))
    labels = np.where(rng.random(n) < p, 1.0, -1.0)
    noise = "minibatch" if batch_size is not None and batch_size < n else "none"
    return Problem(kind="logistic", dim=d, noise=noise,
                   batch_size=int(batch_size or n) if noise == "minibatch" else 0,
                   data={"X": X, "y": labels})


def mlp(n_in: int, n_hidden: int, n_samples: int = 256,
        batch_size: int | None = None, target_noise: float = 0.1,
        seed: int = 0) -> Problem:
    """Squared loss of a (n_in -> n_hidden -> 1) tanh network on teacher data.

    Targets come from a random teacher network of the same shape plus
    Gaussian noise, so the student's loss landscape is non-convex but has
    well-scaled gradients near standard-normal initialisation.
    """
    rng = stream(seed, 0, "problem-mlp")
    X = rng.standard_normal((n_samples, n_in))
    t_w1 = rng.standard_normal((n_hidden, n_in)) / np.sqrt(n_in)
    t_b1 = rng.standard_normal(n_hidden) * 0.5
    t_w2 = rng.standard_normal(n_hidden) / np.sqrt(n_hidden)
    t_b2 = rng.standard_normal()
    y = np.tanh(X @ t_w1.T + t_b1) @ t_w2 + t_b2
    y = y + target_noise * rng.standard_normal(n_samples)
    dim = n_hidden * n_in + n_hidden + n_hidden + 1
    noise = "minibatch" if batch_size is not None and batch_size < n_samples else "none"
    return Problem(kind="mlp", dim=dim, noise=noise,
                   batch_size=int(batch_size or n_samples) if noise == "minibatch" else 0,
                   data={"X": X, "y": y, "n_in": n_in, "n_hidden": n_hidden})


def _check_w(problem: Problem, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if w.size != problem.dim:
        raise ValueError(f"parameter dim {w.size} != problem dim {problem.dim}")
    return w


def _unpack_mlp(problem: Problem, w: np.ndarray):
    n_in, n_h = problem.data["n_in"], problem.data["n_hidden"]
    i = 0
    w1 = w[i:i + n_h * n_in].reshape(n_h, n_in); i += n_h * n_in
    b1 = w[i:i + n_h]; i += n_h
    w2 = w[i:i + n_h]; i += n_h
    b2 = w[i]
    return w1, b1, w2, b2


def _mlp_loss_grad(problem: Problem, w: np.ndarray, idx):
    X, y = problem.data["X"][idx], problem.data["y"][idx]
    w1, b1, w2, b2 = _unpack_mlp(problem, w)
    m = X.shape[0]
    hidden = np.tanh(X @ w1.T + b1)          # (m, n_h)
    pred = hidden @ w2 + b2                  # (m,)
    resid = pred - y
    loss = 0.5 * np.mean(resid ** 2)
    d_pred = resid / m
    d_w2 = hidden.T @ d_pred
    d_b2 = np.sum(d_pred)
    d_hidden = np.outer(d_pred, w2) * (1.0 - hidden ** 2)
    d_w1 = d_hidden.T @ X
    d_b1 = d_hidden.sum(axis=0)
    grad = np.concatenate([d_w1.ravel(), d_b1, d_w2, [d_b2]])
    return loss, grad


def _ls_loss_grad(problem: Problem, w: np.ndarray, idx):
    X, y = problem.data["X"][idx], problem.data["y"][idx]
    r = X @ w - y
    m = X.shape[0]
    return 0.5 * np.dot(r, r) / m, X.T @ r / m


def _logistic_loss_grad(problem: Problem, w: np.ndarray, idx):
    X, y = problem.data["X"][idx], problem.data["y"][idx]
    m = X.shape[0]
    z = y * (X @ w)
    loss = np.mean(np.logaddexp(0.0, -z))
    # d/dw log(1 + exp(-z)) = -y * sigmoid(-z) * x
    s = 1.0 / (1.0 + np.exp(z))
    grad = -(X.T @ (y * s)) / m
    return loss, grad


def batch_loss_gradient(problem: Problem, w, indices) -> tuple[float, np.ndarray]:
    """Loss and gradient restricted to the given dataset rows.

    This is the deterministic core that minibatch sampling draws from;
    averaging it over a disjoint partition of all rows recovers the full
    gradient exactly (up to summation order).
    """
    w = _check_w(problem, w)
    idx = np.asarray(indices, dtype=np.intp)
    if problem.kind == "noisy-least-squares":
        return _ls_loss_grad(problem, w, idx)
    if problem.kind == "logistic":
        return _logistic_loss_grad(problem, w, idx)
    if problem.kind == "mlp":
        return _mlp_loss_grad(problem, w, idx)
    raise ValueError(f"{problem.kind} has no dataset rows")


def full_loss(problem: Problem, w) -> float:
    """Exact full-batch loss; deterministic given (problem, w)."""
    w = _check_w(problem, w)
    if problem.kind == "quadratic":
        h = problem.data["h"]
        return float(0.5 * np.dot(h * w, w))
    loss, _ = batch_loss_gradient(problem, w, np.arange(problem.n_samples))
    return float(loss)


def full_gradient(problem: Problem, w) -> np.ndarray:
    """Exact gradient of the full-batch loss."""
    w = _check_w(problem, w)
    if problem.kind == "quadratic":
        return problem.data["h"] * w
    _, grad = batch_loss_gradient(problem, w, np.arange(problem.n_samples))
    return grad


def sample_gradient(problem: Problem, w, rng: np.random.Generator) -> GradSample:
    """One stochastic gradient under the problem's noise model.

    The expectation over the generator equals ``full_gradient`` (minibatch
    rows are drawn uniformly with replacement; a batch covering the whole
    dataset is taken deterministically, so ``batch_size == n`` is exact).
    """
    w = _check_w(problem, w)
    empty = np.empty(0, dtype=np.intp)
    if problem.noise == "none":
        if problem.kind == "quadratic":
            return GradSample(problem.data["h"] * w, full_loss(problem, w), empty)
        idx = np.arange(problem.n_samples)
        loss, grad = batch_loss_gradient(problem, w, idx)
        return GradSample(grad, float(loss), empty)
    if problem.noise == "additive-gaussian":
        grad = full_gradient(problem, w) + problem.noise_sigma * rng.standard_normal(problem.dim)
        return GradSample(grad, full_loss(problem, w), empty)
    # minibatch, with replacement
    n = problem.n_samples
    if problem.batch_size >= n:
        idx = np.arange(n)
    else:
        idx = rng.integers(0, n, size=problem.batch_size)
    loss, grad = batch_loss_gradient(problem, w, idx)
    return GradSample(grad, float(loss), idx)


def finite_diff_check(problem: Problem, w, h: float) -> float:
    """Max relative gap between the analytic gradient and central differences.

    Returns max_i |g_i - (f(w + h e_i) - f(w - h e_i)) / 2h| / (|g_i| + h).
    Requires a noise-free oracle.
    """
    if h <= 0:
        raise ValueError("h must be > 0")
    if problem.noise != "none":
        raise ValueError("finite_diff_check requires noise model 'none'")
    w = _check_w(problem, w).copy()
    analytic = full_gradient(problem, w)
    worst = 0.0
    for i in range(problem.dim):
        orig = w[i]
        w[i] = orig + h
        f_plus = full_loss(problem, w)
        w[i] = orig - h
        f_minus = full_loss(problem, w)
        w[i] = orig
        central = (f_plus - f_minus) / (2.0 * h)
        worst = max(worst, abs(analytic[i] - central) / (abs(analytic[i]) + h))
    return worst
