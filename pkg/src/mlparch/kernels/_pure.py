"""Pure numpy implementation of the hot numerical kernels.

Used as the fallback when the compiled extension is unavailable. Both
backends implement the same three functions with identical signatures;
see :mod:`mlparch.kernels`.
"""

import numpy as np

_LOG_2PI = float(np.log(2.0 * np.pi))


def _phi_matrix(U, kind):
    if kind == 0:
        return np.tanh(U)
    out = np.empty_like(U)
    pos = U >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-U[pos]))
    e = np.exp(U[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def forward(beta, a, b, W, X, kind):
    """Regression function values, shape (n,)."""
    U = X @ W.T + b
    return beta + _phi_matrix(U, kind) @ a


def loglik(beta, a, b, W, X, y, sigma2, kind):
    """Gaussian conditional log-likelihood of the sample."""
    r = y - forward(beta, a, b, W, X, kind)
    n = y.shape[0]
    return -0.5 * n * (_LOG_2PI + np.log(sigma2)) - (r @ r) / (2.0 * sigma2)

def loglik_grad(beta, a, b, W, X, y, sigma2, kind):
    """Log-likelihood and its gradient in the canonical parameter order.

    Returns ``(ll, grad)`` with ``grad`` laid out as
    ``(beta, a_1..a_k, b_1..b_k, w_11..w_kd)``.
    """
    n, d = X.shape
    k = a.shape[0]
    U = X @ W.T + b
    P = _phi_matrix(U, kind)
    r = y - (beta + P @ a)
    ll = -0.5 * n * (_LOG_2PI + np.log(sigma2)) - (r @ r) / (2.0 * sigma2)

    c = r / sigma2
    if kind == 0:
        D1 = 1.0 - P * P
    else:
        D1 = P * (1.0 - P)
    T = D1 * c[:, None]  # (n, k)

    grad = np.empty(1 + 2 * k + k * d)
    grad[0] = c.sum()
    grad[1 : 1 + k] = P.T @ c
    grad[1 + k : 1 + 2 * k] = a * T.sum(axis=0)
    grad[1 + 2 * k :] = (a[:, None] * (T.T @ X)).ravel()
    return ll, grad
