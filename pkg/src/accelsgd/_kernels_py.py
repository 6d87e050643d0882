"""Pure-numpy step kernels (fallback backend).

Each function applies one optimizer step in place on float64 state arrays and
returns the L2 norm of the applied parameter update.  The compiled Cython
backend implements the same functions with identical per-element operation
order, so the two backends produce bit-identical state (the update norm may
differ in the last bits because numpy sums pairwise).

`bc1` / `bc2` are the bias-correction denominators 1 - beta^t, passed as 1.0
when correction is disabled.
"""

import functools

import numpy as np


def _ieee(fn):
    # IEEE inf/nan semantics without runtime warnings, matching the compiled
    # backend; diverging runs surface through the non-finite update norm.
    @functools.wraps(fn)
    def wrapped(*args):
        with np.errstate(over="ignore", invalid="ignore"):
            return fn(*args)
    return wrapped


def _norm(delta) -> float:
    return float(np.sqrt(np.sum(delta * delta)))


@_ieee
def accel_sgd_step(w, m, g, beta, eta, alpha) -> float:
    m *= beta
    m += g
    delta = eta * m + alpha * g
    w -= delta
    return _norm(delta)


@_ieee
def schedule_free_sgd_step(z, x, y, g, gamma, c, wd) -> float:
    dz = gamma * g + (gamma * wd) * y
    z -= dz
    x *= 1.0 - c
    x += c * z
    return _norm(dz)


@_ieee
def schedule_free_adamw_step(z, x, y, g, v, gamma, c, b2, eps, wd, bc2) -> float:
    v *= b2
    v += (1.0 - b2) * (g * g)
    dz = gamma * (g / (np.sqrt(v / bc2) + eps)) + (gamma * wd) * y
    z -= dz
    x *= 1.0 - c
    x += c * z
    return _norm(dz)


@_ieee
def adamw_step(w, m, v, g, lr, b1, b2, eps, wd, bc1, bc2) -> float:
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    delta = lr * ((m / bc1) / (np.sqrt(v / bc2) + eps)) + (lr * wd) * w
    w -= delta
    return _norm(delta)


@_ieee
def laprop_step(w, m, v, g, lr, b1, b2, eps, wd, bc1, bc2) -> float:
    v *= b2
    v += (1.0 - b2) * (g * g)
    m *= b1
    m += (1.0 - b1) * (g / (np.sqrt(v / bc2) + eps))
    delta = lr * (m / bc1) + (lr * wd) * w
    w -= delta
    return _norm(delta)


@_ieee
def lion_step(w, m, g, lr, b1, b2, wd) -> float:
    # sign(0) = 0, so dead coordinates do not drift
    delta = lr * np.sign(b1 * m + (1.0 - b1) * g) + (lr * wd) * w
    m *= b2
    m += (1.0 - b2) * g
    w -= delta
    return _norm(delta)


@_ieee
def mars_step(w, m, v, g_prev, g, cbuf, lr, b1, b2, gamma, eps, wd, clip,
              bc1, bc2) -> float:
    k = gamma * (b1 / (1.0 - b1))
    np.subtract(g, g_prev, out=cbuf)
    cbuf *= k
    cbuf += g
    if clip:
        nrm = float(np.sqrt(np.sum(cbuf * cbuf)))
        if nrm > 1.0:
            cbuf /= nrm
    m *= b1
    m += (1.0 - b1) * cbuf
    v *= b2
    v += (1.0 - b2) * (cbuf * cbuf)
    delta = lr * ((m / bc1) / (np.sqrt(v / bc2) + eps)) + (lr * wd) * w
    w -= delta
    g_prev[:] = g
    return _norm(delta)


@_ieee
def ademamix_step(w, m1, m2, v, g, lr, b1, b2, b3, alpha, eps, wd, bc1, bc2) -> float:
    m1 *= b1
    m1 += (1.0 - b1) * g
    m2 *= b3
    m2 += (1.0 - b3) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    delta = lr * ((m1 / bc1 + alpha * m2) / (np.sqrt(v / bc2) + eps)) + (lr * wd) * w
    w -= delta
    return _norm(delta)


@_ieee
def simplified_ademamix_step(w, m1, v, g, lr, b1, b2, alpha, eps, wd, bc2) -> float:
    # theory-style momentum: no (1 - b1) factor on the gradient
    m1 *= b1
    m1 += g
    v *= b2
    v += (1.0 - b2) * (g * g)
    delta = lr * ((m1 + alpha * g) / (np.sqrt(v / bc2) + eps)) + (lr * wd) * w
    w -= delta
    return _norm(delta)


@_ieee
def accel_adam_avg_step(w, m, v, w_avg, g, lr, b1, b2, b3, c, eps, wd, bc2) -> float:
    # m is read before it is refreshed: the numerator mixes last step's m
    v *= b2
    v += (1.0 - b2) * (g * g)
    delta = lr * ((b3 * m + (1.0 - b3) * g) / (np.sqrt(v / bc2) + eps)) + (lr * wd) * w
    w -= delta
    m *= b1
    m += (1.0 - b1) * g
    w_avg *= c
    w_avg += (1.0 - c) * w
    return _norm(delta)
