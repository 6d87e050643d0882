# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled step kernels.

Mirrors _kernels_py.py exactly: same signatures, same per-element operation
order, so state arrays come out bit-identical to the numpy fallback (the
build disables FP contraction for this reason).  Update norms are summed
linearly here but pairwise in numpy and may differ in the last bits.
"""

from libc.math cimport sqrt


def accel_sgd_step(double[::1] w, double[::1] m, double[::1] g,
                   double beta, double eta, double alpha):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double d, acc = 0.0
    for i in range(n):
        m[i] = beta * m[i] + g[i]
        d = eta * m[i] + alpha * g[i]
        w[i] -= d
        acc += d * d
    return sqrt(acc)


def schedule_free_sgd_step(double[::1] z, double[::1] x, double[::1] y,
                           double[::1] g, double gamma, double c, double wd):
    cdef Py_ssize_t i, n = z.shape[0]
    cdef double gwd = gamma * wd
    cdef double omc = 1.0 - c
    cdef double d, acc = 0.0
    for i in range(n):
        d = gamma * g[i] + gwd * y[i]
        z[i] -= d
        x[i] = omc * x[i] + c * z[i]
        acc += d * d
    return sqrt(acc)


def schedule_free_adamw_step(double[::1] z, double[::1] x, double[::1] y,
                             double[::1] g, double[::1] v, double gamma,
                             double c, double b2, double eps, double wd,
                             double bc2):
    cdef Py_ssize_t i, n = z.shape[0]
    cdef double omb2 = 1.0 - b2
    cdef double gwd = gamma * wd
    cdef double omc = 1.0 - c
    cdef double d, acc = 0.0
    for i in range(n):
        v[i] = b2 * v[i] + omb2 * (g[i] * g[i])
        d = gamma * (g[i] / (sqrt(v[i] / bc2) + eps)) + gwd * y[i]
        z[i] -= d
        x[i] = omc * x[i] + c * z[i]
        acc += d * d
    return sqrt(acc)


def adamw_step(double[::1] w, double[::1] m, double[::1] v, double[::1] g,
               double lr, double b1, double b2, double eps, double wd,
               double bc1, double bc2):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double omb1 = 1.0 - b1
    cdef double omb2 = 1.0 - b2
    cdef double lrwd = lr * wd
    cdef double d, acc = 0.0
    for i in range(n):
        m[i] = b1 * m[i] + omb1 * g[i]
        v[i] = b2 * v[i] + omb2 * (g[i] * g[i])
        d = lr * ((m[i] / bc1) / (sqrt(v[i] / bc2) + eps)) + lrwd * w[i]
        w[i] -= d
        acc += d * d
    return sqrt(acc)


def laprop_step(double[::1] w, double[::1] m, double[::1] v, double[::1] g,
                double lr, double b1, double b2, double eps, double wd,
                double bc1, double bc2):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double omb1 = 1.0 - b1
    cdef double omb2 = 1.0 - b2
    cdef double lrwd = lr * wd
    cdef double d, acc = 0.0
    for i in range(n):
        v[i] = b2 * v[i] + omb2 * (g[i] * g[i])
        m[i] = b1 * m[i] + omb1 * (g[i] / (sqrt(v[i] / bc2) + eps))
        d = lr * (m[i] / bc1) + lrwd * w[i]
        w[i] -= d
        acc += d * d
    return sqrt(acc)


def lion_step(double[::1] w, double[::1] m, double[::1] g,
              double lr, double b1, double b2, double wd):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double omb1 = 1.0 - b1
    cdef double omb2 = 1.0 - b2
    cdef double lrwd = lr * wd
    cdef double u, s, d, acc = 0.0
    for i in range(n):
        u = b1 * m[i] + omb1 * g[i]
        s = 1.0 if u > 0.0 else (-1.0 if u < 0.0 else 0.0)
        d = lr * s + lrwd * w[i]
        m[i] = b2 * m[i] + omb2 * g[i]
        w[i] -= d
        acc += d * d
    return sqrt(acc)


def mars_step(double[::1] w, double[::1] m, double[::1] v, double[::1] g_prev,
              double[::1] g, double[::1] cbuf, double lr, double b1, double b2,
              double gamma, double eps, double wd, bint clip,
              double bc1, double bc2):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double k = gamma * (b1 / (1.0 - b1))
    cdef double omb1 = 1.0 - b1
    cdef double omb2 = 1.0 - b2
    cdef double lrwd = lr * wd
    cdef double d, nrm, acc = 0.0
    for i in range(n):
        cbuf[i] = k * (g[i] - g_prev[i]) + g[i]
    if clip:
        nrm = 0.0
        for i in range(n):
            nrm += cbuf[i] * cbuf[i]
        nrm = sqrt(nrm)
        if nrm > 1.0:
            for i in range(n):
                cbuf[i] /= nrm
    for i in range(n):
        m[i] = b1 * m[i] + omb1 * cbuf[i]
        v[i] = b2 * v[i] + omb2 * (cbuf[i] * cbuf[i])
        d = lr * ((m[i] / bc1) / (sqrt(v[i] / bc2) + eps)) + lrwd * w[i]
        w[i] -= d
        acc += d * d
        g_prev[i] = g[i]
    return sqrt(acc)


def ademamix_step(double[::1] w, double[::1] m1, double[::1] m2, double[::1] v,
                  double[::1] g, double lr, double b1, double b2, double b3,
                  double alpha, double eps, double wd, double bc1, double bc2):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double omb1 = 1.0 - b1
    cdef double omb2 = 1.0 - b2
    cdef double omb3 = 1.0 - b3
    cdef double lrwd = lr * wd
    cdef double d, acc = 0.0
    for i in range(n):
        m1[i] = b1 * m1[i] + omb1 * g[i]
        m2[i] = b3 * m2[i] + omb3 * g[i]
        v[i] = b2 * v[i] + omb2 * (g[i] * g[i])
        d = lr * ((m1[i] / bc1 + alpha * m2[i]) / (sqrt(v[i] / bc2) + eps)) + lrwd * w[i]
        w[i] -= d
        acc += d * d
    return sqrt(acc)


def simplified_ademamix_step(double[::1] w, double[::1] m1, double[::1] v,
                             double[::1] g, double lr, double b1, double b2,
                             double alpha, double eps, double wd, double bc2):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double omb2 = 1.0 - b2
    cdef double lrwd = lr * wd
    cdef double d, acc = 0.0
    for i in range(n):
        m1[i] = b1 * m1[i] + g[i]
        v[i] = b2 * v[i] + omb2 * (g[i] * g[i])
        d = lr * ((m1[i] + alpha * g[i]) / (sqrt(v[i] / bc2) + eps)) + lrwd * w[i]
        w[i] -= d
        acc += d * d
    return sqrt(acc)


def accel_adam_avg_step(double[::1] w, double[::1] m, double[::1] v,
                        double[::1] w_avg, double[::1] g, double lr, double b1,
                        double b2, double b3, double c, double eps, double wd,
                        double bc2):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double omb1 = 1.0 - b1
    cdef double omb2 = 1.0 - b2
    cdef double omb3 = 1.0 - b3
    cdef double omc = 1.0 - c
    cdef double lrwd = lr * wd
    cdef double d, acc = 0.0
    for i in range(n):
        v[i] = b2 * v[i] + omb2 * (g[i] * g[i])
        d = lr * ((b3 * m[i] + omb3 * g[i]) / (sqrt(v[i] / bc2) + eps)) + lrwd * w[i]
        w[i] -= d
        m[i] = b1 * m[i] + omb1 * g[i]
        w_avg[i] = c * w_avg[i] + omc * w[i]
        acc += d * d
    return sqrt(acc)
