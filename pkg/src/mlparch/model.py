"""One-hidden-layer MLP regression model and its Gaussian log-likelihood.

The regression function with ``k`` hidden units on inputs in R^d is

    F(x) = beta + sum_i a_i * phi(b_i + w_i . x)

and an observation pair (x, y) has y | x ~ N(F(x), sigma2) with known noise
variance. The free parameters are collected in :class:`Theta`; every
gradient in the package uses the canonical ordering
``(beta, a_1..a_k, b_1..b_k, w_11..w_kd)`` (W in row-major order).

The density factor of the input distribution does not depend on the
parameters, so it is dropped from the log-likelihood throughout: model
fits, criterion differences and likelihood ratios are unchanged by this.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatchError
from .transfer import TransferFunction


@dataclass
class Theta:
    """Full parameter vector of a k-hidden-unit MLP on R^d inputs.

    Attributes
    ----------
    beta : float
        Output bias.
    a : ndarray, shape (k,)
        Output weights.
    b : ndarray, shape (k,)
        Hidden biases.
    W : ndarray, shape (k, d)
        Input weights, one row per hidden unit.
    """

    beta: float
    a: np.ndarray
    b: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        self.beta = float(self.beta)
        self.a = np.ascontiguousarray(self.a, dtype=np.float64)
        self.b = np.ascontiguousarray(self.b, dtype=np.float64)
        self.W = np.ascontiguousarray(self.W, dtype=np.float64)
        if self.a.ndim != 1 or self.b.ndim != 1:
            raise DimensionMismatchError("a and b must be one-dimensional")
        if self.W.ndim != 2:
            raise DimensionMismatchError("W must be a (k, d) matrix")
        k = self.a.shape[0]
        if k < 1:
            raise DimensionMismatchError("at least one hidden unit is required")
        if self.b.shape[0] != k or self.W.shape[0] != k:
            raise DimensionMismatchError(
                f"inconsistent hidden-unit count: a has {k}, b has {self.b.shape[0]}, "
                f"W has {self.W.shape[0]} rows"
            )
        if self.W.shape[1] < 1:
            raise DimensionMismatchError("input dimension must be at least 1")

    @property
    def k(self) -> int:
        return self.a.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def dim(self) -> int:
        """Number of free parameters, 2k + 1 + k*d."""
        return 2 * self.k + 1 + self.k * self.d

    def to_vector(self) -> np.ndarray:
        """Flatten to the canonical ordering (beta, a, b, W row-major)."""
        return np.concatenate(([self.beta], self.a, self.b, self.W.ravel()))

    @classmethod
    def from_vector(cls, vec: np.ndarray, k: int, d: int) -> "Theta":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (2 * k + 1 + k * d,):
            raise DimensionMismatchError(
                f"expected a vector of length {2 * k + 1 + k * d}, got shape {vec.shape}"
            )
        return cls(
            beta=vec[0],
            a=vec[1 : 1 + k].copy(),
            b=vec[1 + k : 1 + 2 * k].copy(),
            W=vec[1 + 2 * k :].reshape(k, d).copy(),
        )

    def permuted(self, order) -> "Theta":
        """Reorder the hidden units; the regression function is unchanged."""
        order = np.asarray(order, dtype=np.intp)
        return Theta(self.beta, self.a[order], self.b[order], self.W[order])

    def copy(self) -> "Theta":
        return Theta(self.beta, self.a.copy(), self.b.copy(), self.W.copy())


@dataclass
class Dataset:
    """An i.i.d. regression sample (X, y) with X of shape (n, d)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        if self.X.ndim != 2:
            raise DimensionMismatchError("X must be a (n, d) matrix")
        if self.y.ndim != 1:
            raise DimensionMismatchError("y must be one-dimensional")
        if self.X.shape[0] != self.y.shape[0]:
            raise DimensionMismatchError(
                f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]} entries"
            )
        if self.X.shape[0] < 1:
            raise DimensionMismatchError("the sample must contain at least one pair")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _as_input_matrix(theta: Theta, x) -> tuple[np.ndarray, bool]:
    """Coerce x to (n, d); returns (matrix, was_single_point)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != theta.d:
            raise DimensionMismatchError(
                f"input has dimension {x.shape[0]}, model expects {theta.d}"
            )
        return np.ascontiguousarray(x[None, :]), True
    if x.ndim == 2:
        if x.shape[1] != theta.d:
            raise DimensionMismatchError(
                f"input has dimension {x.shape[1]}, model expects {theta.d}"
            )
        return np.ascontiguousarray(x), False
    raise DimensionMismatchError("x must be a d-vector or a (n, d) matrix")


def mlp_forward(theta: Theta, phi: TransferFunction, x):
    """Evaluate F(x) = beta + sum_i a_i phi(b_i + w_i . x).

    ``x`` may be a single d-vector (returns a float) or a (n, d) matrix
    (returns a (n,) array).
    """
    X, single = _as_input_matrix(theta, x)
    out = kernels.forward(theta.beta, theta.a, theta.b, theta.W, X, phi.code)
    return float(out[0]) if single else out


def mlp_grad_params(theta: Theta, phi: TransferFunction, x) -> np.ndarray:
    """Gradient of F(x) with respect to theta, canonical ordering.

    Entries: dF/dbeta = 1, dF/da_i = phi(u_i), dF/db_i = a_i phi'(u_i),
    dF/dw_il = a_i x_l phi'(u_i), where u_i = b_i + w_i . x.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != theta.d:
        raise DimensionMismatchError(
            f"x must be a vector of dimension {theta.d}, got shape {x.shape}"
        )
    u = theta.b + theta.W @ x
    p = phi.phi(u)
    dp = phi.d1(u)
    grad = np.empty(theta.dim)
    grad[0] = 1.0
    grad[1 : 1 + theta.k] = p
    grad[1 + theta.k : 1 + 2 * theta.k] = theta.a * dp
    grad[1 + 2 * theta.k :] = ((theta.a * dp)[:, None] * x[None, :]).ravel()
    return grad


def _check_sigma2(sigma2: float) -> float:
    sigma2 = float(sigma2)
    if not sigma2 > 0.0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    return sigma2


def _check_data(theta: Theta, data: Dataset) -> None:
    if data.d != theta.d:
        raise DimensionMismatchError(
            f"data has input dimension {data.d}, model expects {theta.d}"
        )


def cond_loglik(theta: Theta, phi: TransferFunction, sigma2: float, data: Dataset) -> float:
    """Sum over the sample of log N(y_i; F(x_i), sigma2).

    The (parameter-free) input-density factor is dropped.
    """
    sigma2 = _check_sigma2(sigma2)
    _check_data(theta, data)
    return float(
        kernels.loglik(theta.beta, theta.a, theta.b, theta.W, data.X, data.y, sigma2, phi.code)
    )


def cond_loglik_grad(
    theta: Theta, phi: TransferFunction, sigma2: float, data: Dataset
) -> np.ndarray:
    """Gradient of :func:`cond_loglik` with respect to theta.

    Equals sum_i (y_i - F(x_i)) / sigma2 * dF(x_i)/dtheta in the canonical
    ordering.
    """
    sigma2 = _check_sigma2(sigma2)
    _check_data(theta, data)
    _, grad = kernels.loglik_grad(
        theta.beta, theta.a, theta.b, theta.W, data.X, data.y, sigma2, phi.code
    )
    return grad


def cond_loglik_and_grad(
    theta: Theta, phi: TransferFunction, sigma2: float, data: Dataset
) -> tuple[float, np.ndarray]:
    """Fused value and gradient; one pass over the sample."""
    sigma2 = _check_sigma2(sigma2)
    _check_data(theta, data)
    ll, grad = kernels.loglik_grad(
        theta.beta, theta.a, theta.b, theta.W, data.X, data.y, sigma2, phi.code
    )
    return float(ll), grad
