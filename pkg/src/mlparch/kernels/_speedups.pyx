# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementation of the hot numerical kernels.

Scalar loops over samples and hidden units; avoids temporary arrays, which
matters for the many small likelihood/gradient evaluations performed inside
the multistart optimizer.
"""

from libc.math cimport exp as c_exp, log as c_log, tanh as c_tanh

import numpy as np

cdef double _LOG_2PI = 1.8378770664093453


cdef inline double _phi(double u, int kind) noexcept nogil:
    cdef double e
    if kind == 0:
        return c_tanh(u)
    if u >= 0.0:
        return 1.0 / (1.0 + c_exp(-u))
    e = c_exp(u)
    return e / (1.0 + e)


def forward(double beta, double[::1] a, double[::1] b, double[:, ::1] W,
            double[:, ::1] X, int kind):
    """Regression function values, shape (n,)."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t k = a.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef Py_ssize_t t, i, l
    cdef double u, s
    with nogil:
        for t in range(n):
            s = beta
            for i in range(k):
                u = b[i]
                for l in range(d):
                    u += W[i, l] * X[t, l]
                s += a[i] * _phi(u, kind)
            o[t] = s
    return out


def loglik(double beta, double[::1] a, double[::1] b, double[:, ::1] W,
           double[:, ::1] X, double[::1] y, double sigma2, int kind):
    """Gaussian conditional log-likelihood of the sample."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t k = a.shape[0]
    cdef Py_ssize_t t, i, l
    cdef double u, pred, r
    cdef double rss = 0.0
    with nogil:
        for t in range(n):
            pred = beta
            for i in range(k):
                u = b[i]
                for l in range(d):
                    u += W[i, l] * X[t, l]
                pred += a[i] * _phi(u, kind)
            r = y[t] - pred
            rss += r * r
    return -0.5 * n * (_LOG_2PI + c_log(sigma2)) - rss / (2.0 * sigma2)


def loglik_grad(double beta, double[::1] a, double[::1] b, double[:, ::1] W,
                double[:, ::1] X, double[::1] y, double sigma2, int kind):
    """Log-likelihood and its gradient in the canonical parameter order.

    Returns ``(ll, grad)`` with ``grad`` laid out as
    ``(beta, a_1..a_k, b_1..b_k, w_11..w_kd)``.
    """
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t k = a.shape[0]
    grad = np.zeros(1 + 2 * k + k * d)
    pbuf = np.empty(k)
    dbuf = np.empty(k)
    cdef double[::1] g = grad
    cdef double[::1] pv = pbuf
    cdef double[::1] dv = dbuf
    cdef Py_ssize_t t, i, l, base
    cdef double u, p, pred, r, c, cad
    cdef double rss = 0.0
    with nogil:
        for t in range(n):
            pred = beta
            for i in range(k):
                u = b[i]
                for l in range(d):
                    u += W[i, l] * X[t, l]
                p = _phi(u, kind)
                pv[i] = p
                if kind == 0:
                    dv[i] = 1.0 - p * p
                else:
                    dv[i] = p * (1.0 - p)
                pred += a[i] * p
            r = y[t] - pred
            rss += r * r
            c = r / sigma2
            g[0] += c
            for i in range(k):
                g[1 + i] += c * pv[i]
                cad = c * a[i] * dv[i]
                g[1 + k + i] += cad
                base = 1 + 2 * k + i * d
                for l in range(d):
                    g[base + l] += cad * X[t, l]
    ll = -0.5 * n * (_LOG_2PI + c_log(sigma2)) - rss / (2.0 * sigma2)
    return ll, grad
