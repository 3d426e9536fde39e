"""Numerical verification machinery for the singular likelihood geometry.

When the hidden-unit count k of a candidate model exceeds the true count
k0, the true regression function is realized by a whole fiber of
parameters: the true units are duplicated into groups sharing (b, w) with
output weights split by proportions q_j, and surplus units carry zero
output weight. Near such a fiber point the parameter is split into an
identifiable block Phi (output bias, per-unit biases and input weights of
the grouped units, the group output-weight excesses s_i, and the surplus
output weights) and a non-identifiable block Psi (the proportions q_j and
the surplus unit locations). This module builds that split, evaluates the
likelihood ratio against the true density, its L2(f) distance from 1, the
normalized score, and the second-order expansion of the ratio in the
identifiable block, whose remainder can be studied as the displacement
shrinks. It also computes the Gram matrix certifying linear independence
of the second-order derivative family in L2 of the input distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSplitError,
    DimensionMismatchError,
    FiberPointError,
    UnmatchableParameterError,
)
from .model import Theta, mlp_forward
from .transfer import TransferFunction

DEFAULT_H3_TOL = 1e-8
_FIBER_D_EPS = 1e-15


@dataclass(frozen=True)
class RatioContext:
    """True model against which likelihood ratios are formed."""

    theta0: Theta
    phi: TransferFunction
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0.0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")

    def predict(self, x):
        return mlp_forward(self.theta0, self.phi, x)

    def e(self, x, y):
        """Normalized residual (y - F0(x)) / sigma2; zero on the graph of F0."""
        return (np.asarray(y, dtype=np.float64) - self.predict(x)) / self.sigma2

    def delta(self, theta: Theta, x):
        """Regression-function difference F_theta(x) - F0(x)."""
        return mlp_forward(theta, self.phi, x) - self.predict(x)


@dataclass
class Reparam:
    """Identifiable/non-identifiable split of a k-unit parameter near the
    fiber of ``theta0``.

    Units are re-indexed so the groups are contiguous: unit j belongs to
    true unit ``group_of[j]`` for j < t[-1], and the remaining units are
    surplus. The identifiable block holds (beta, b, W, s, a_surplus); the
    non-identifiable block holds (q, b_surplus, W_surplus).
    """

    theta0: Theta
    t: np.ndarray  # (k0 + 1,) group boundaries, t[0] = 0
    group_of: np.ndarray  # (t[-1],) grouped unit -> true unit
    beta: float
    b: np.ndarray  # (t[-1],)
    W: np.ndarray  # (t[-1], d)
    s: np.ndarray  # (k0,)
    a_surplus: np.ndarray
    q: np.ndarray  # (t[-1],)
    b_surplus: np.ndarray
    W_surplus: np.ndarray

    @property
    def k0(self) -> int:
        return self.theta0.k

    @property
    def d(self) -> int:
        return self.theta0.d

    @property
    def k(self) -> int:
        return self.t[-1] + self.a_surplus.shape[0]

    @property
    def n_grouped(self) -> int:
        return int(self.t[-1])

    @property
    def phi_dim(self) -> int:
        m = self.n_grouped
        return 1 + m + m * self.d + self.k0 + self.a_surplus.shape[0]

    def phi_vector(self) -> np.ndarray:
        """Identifiable block (beta, b_1..b_m, w rows, s_1..s_k0, surplus a)."""
        return np.concatenate(
            ([self.beta], self.b, self.W.ravel(), self.s, self.a_surplus)
        )

    def phi_base_vector(self) -> np.ndarray:
        """Value of the identifiable block at the fiber itself."""
        th0 = self.theta0
        b0 = th0.b[self.group_of]
        W0 = th0.W[self.group_of]
        return np.concatenate(
            ([th0.beta], b0, W0.ravel(), np.zeros(self.k0), np.zeros(self.a_surplus.shape[0]))
        )

    def psi_vector(self) -> np.ndarray:
        """Non-identifiable block (q_1..q_m, surplus b, surplus w rows)."""
        return np.concatenate((self.q, self.b_surplus, self.W_surplus.ravel()))

    def with_phi_vector(self, vec: np.ndarray) -> "Reparam":
        """Copy with the identifiable block replaced (Psi unchanged)."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.phi_dim,):
            raise DimensionMismatchError(
                f"expected identifiable block of length {self.phi_dim}, got {vec.shape}"
            )
        m, d, k0 = self.n_grouped, self.d, self.k0
        return Reparam(
            theta0=self.theta0,
            t=self.t.copy(),
            group_of=self.group_of.copy(),
            beta=float(vec[0]),
            b=vec[1 : 1 + m].copy(),
            W=vec[1 + m : 1 + m + m * d].reshape(m, d).copy(),
            s=vec[1 + m + m * d : 1 + m + m * d + k0].copy(),
            a_surplus=vec[1 + m + m * d + k0 :].copy(),
            q=self.q.copy(),
            b_surplus=self.b_surplus.copy(),
            W_surplus=self.W_surplus.copy(),
        )

    def to_theta(self) -> Theta:
        """Reassemble the plain parameter vector (grouped units first)."""
        group_sums = self.s + self.theta0.a
        a_grouped = self.q * group_sums[self.group_of]
        return Theta(
            self.beta,
            np.concatenate([a_grouped, self.a_surplus]),
            np.concatenate([self.b, self.b_surplus]),
            np.vstack([self.W, self.W_surplus]) if self.a_surplus.size else self.W.copy(),
        )


def build_reparam(theta: Theta, theta0: Theta, match_tol: float = 1e-6) -> Reparam:
    """Split ``theta`` into identifiable and non-identifiable blocks
    relative to ``theta0``.

    Each unit of theta is assigned to the true unit minimizing the
    Euclidean distance between their (b, w) pairs when that distance is at
    most ``match_tol``, and to the surplus block otherwise. Every true
    unit must receive at least one unit, and no group may have zero total
    output weight (the within-group proportions would be undefined).
    """
    if theta.d != theta0.d:
        raise DimensionMismatchError(
            f"theta has input dimension {theta.d}, theta0 has {theta0.d}"
        )
    if theta.k < theta0.k:
        raise ValueError(f"theta must have at least {theta0.k} units, got {theta.k}")

    loc = np.column_stack([theta.b, theta.W])  # (k, 1 + d)
    loc0 = np.column_stack([theta0.b, theta0.W])
    dists = np.linalg.norm(loc[:, None, :] - loc0[None, :, :], axis=2)  # (k, k0)
    nearest = np.argmin(dists, axis=1)
    matched = dists[np.arange(theta.k), nearest] <= match_tol

    members = [np.flatnonzero(matched & (nearest == i)) for i in range(theta0.k)]
    for i, m in enumerate(members):
        if m.size == 0:
            raise UnmatchableParameterError(
                f"no unit of theta lies within match_tol={match_tol} of true unit {i}"
            )
    surplus = np.flatnonzero(~matched)

    order = np.concatenate(members)
    t = np.concatenate(([0], np.cumsum([m.size for m in members])))
    group_of = np.concatenate([np.full(m.size, i, dtype=np.intp) for i, m in enumerate(members)])

    s = np.empty(theta0.k)
    q = np.empty(order.size)
    for i, m in enumerate(members):
        total = theta.a[m].sum()
        if total == 0.0:
            raise DegenerateSplitError(
                f"group {i} has zero total output weight; proportions are undefined"
            )
        s[i] = total - theta0.a[i]
        q[t[i] : t[i + 1]] = theta.a[m] / total

    return Reparam(
        theta0=theta0,
        t=t.astype(np.intp),
        group_of=group_of,
        beta=theta.beta,
        b=theta.b[order].copy(),
        W=theta.W[order].copy(),
        s=s,
        a_surplus=theta.a[surplus].copy(),
        q=q,
        b_surplus=theta.b[surplus].copy(),
        W_surplus=theta.W[surplus].reshape(surplus.size, theta.d).copy(),
    )


def density_ratio(theta: Theta, ctx: RatioContext, x, y):
    """Likelihood ratio f_theta / f_true at the observation (x, y).

    Equals exp(delta(x) e(z) - delta(x)^2 / (2 sigma2)) with
    delta = F_theta - F0; this is the exponent difference of the two
    Gaussian conditional densities, so their normalizing constants cancel.
    """
    delta = ctx.delta(theta, x)
    e = ctx.e(x, y)
    out = np.exp(delta * e - delta * delta / (2.0 * ctx.sigma2))
    return float(out) if np.isscalar(delta) or np.ndim(out) == 0 else out


def d_norm(theta: Theta, ctx: RatioContext, x_sampler, n_mc: int, seed) -> float:
    """L2(f) distance of the likelihood ratio from 1.

    The squared distance is E_x[exp(delta(x)^2 / sigma2)] - 1: the inner
    integral over y of f_theta^2 / f is Gaussian and reduces in closed
    form to exp(delta^2 / sigma2), leaving only the expectation over the
    input distribution, estimated with ``n_mc`` Monte Carlo draws.
    """
    d2, _ = d_norm_stats(theta, ctx, x_sampler, n_mc, seed)
    return math.sqrt(max(d2, 0.0))


def d_norm_stats(theta: Theta, ctx: RatioContext, x_sampler, n_mc: int, seed):
    """Squared-distance estimate and its Monte Carlo standard error."""
    if n_mc < 1:
        raise ValueError("n_mc must be at least 1")
    rng = np.random.default_rng(seed)
    X = x_sampler.sample(n_mc, rng)
    delta = ctx.delta(theta, X)
    vals = np.exp(delta * delta / ctx.sigma2)
    d2 = float(vals.mean() - 1.0)
    se = float(vals.std(ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else float("inf")
    return d2, se


def score_s(theta: Theta, ctx: RatioContext, x, y, d_value: float):
    """Normalized score (f_theta/f - 1) / d_value."""
    if not d_value > 0.0:
        raise FiberPointError(
            "the normalized score is undefined on the fiber (d_value must be positive)"
        )
    return (density_ratio(theta, ctx, x, y) - 1.0) / d_value


def _expansion_pieces(rep: Reparam, ctx: RatioContext, X: np.ndarray):
    """First differential and quadratic form of the regression difference
    in the identifiable block, evaluated at the fiber base point."""
    th0 = ctx.theta0
    phi = ctx.phi
    U0 = X @ th0.W.T + th0.b  # (n, k0)
    P0 = phi.phi(U0)
    D1 = phi.d1(U0)
    D2 = phi.d2(U0)

    dbeta = rep.beta - th0.beta
    db = rep.b - th0.b[rep.group_of]  # (m,)
    dW = rep.W - th0.W[rep.group_of]  # (m, d)
    drift = db + X @ dW.T  # (n, m): per-unit first-order input shift

    g = rep.group_of
    a0g = th0.a[g]
    qa = rep.q * a0g

    first = dbeta + P0 @ rep.s + (D1[:, g] * drift) @ qa
    if rep.a_surplus.size:
        Us = X @ rep.W_surplus.T + rep.b_surplus
        first = first + phi.phi(Us) @ rep.a_surplus

    # Quadratic form h^T D2F h of the regression function in the block:
    # within-group curvature plus the excess/location cross terms.
    quad = (D2[:, g] * drift * drift) @ qa
    quad = quad + 2.0 * ((D1[:, g] * drift) @ (rep.q * rep.s[g]))
    return first, quad


def lemma1_expansion(rep: Reparam, ctx: RatioContext, x, y):
    """Second-order expansion of the likelihood ratio in the identifiable
    block around the fiber.

    Writing h for the displacement of the block and e(z) for the
    normalized residual, the exact ratio is exp(delta e - delta^2/(2
    sigma2)) and its Taylor expansion through second order in h is

        1 + [DF h] e + 0.5 * ( [h' D2F h] e + [DF h]^2 (e^2 - 1/sigma2) )

    where DF and D2F are the first and second differentials of the
    regression function in the block at the fiber point. The first-order
    bracket consists of the output-bias shift, the group excesses against
    phi, the within-group location shifts against a0 phi', and the surplus
    output weights against their unit responses.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != rep.d:
        raise DimensionMismatchError(f"x has dimension {X.shape[1]}, model expects {rep.d}")
    if rep.theta0 is not ctx.theta0 and not _same_theta(rep.theta0, ctx.theta0):
        raise ValueError("the reparametrization was built against a different true model")

    e = ctx.e(X, np.atleast_1d(np.asarray(y, dtype=np.float64)))
    first, quad = _expansion_pieces(rep, ctx, X)
    second = quad * e + first * first * (e * e - 1.0 / ctx.sigma2)
    out = 1.0 + first * e + 0.5 * second
    return float(out[0]) if single else out


def _same_theta(t1: Theta, t2: Theta) -> bool:
    return (
        t1.beta == t2.beta
        and np.array_equal(t1.a, t2.a)
        and np.array_equal(t1.b, t2.b)
        and np.array_equal(t1.W, t2.W)
    )


@dataclass
class RemainderRow:
    """One displacement size of the expansion-remainder study."""

    delta: float
    d_value: float
    remainder: float
    ratio: float  # remainder / d_value; nan when flagged
    flagged: bool

    def to_csv_row(self) -> list:
        return [self.delta, self.d_value, self.remainder, self.ratio]


def expansion_remainder_study(
    base: Reparam,
    direction: np.ndarray,
    delta_grid,
    ctx: RatioContext,
    x_sampler,
    n_mc: int,
    seed,
) -> list:
    """Measure how fast the expansion error vanishes relative to the
    likelihood-ratio distance as the identifiable displacement shrinks.

    For each delta the fiber base point is displaced by delta * direction
    in the identifiable block (Psi fixed), and both
    R = ||ratio - expansion||_2 and D = ||ratio - 1||_2 are estimated on a
    single Monte Carlo sample of observations shared across the grid
    (matched seeds). Rows where D stays at zero (a direction that never
    leaves the fiber) are flagged and get ratio = nan.
    """
    delta_grid = [float(t) for t in delta_grid]
    if len(delta_grid) < 3 or any(b >= a for a, b in zip(delta_grid, delta_grid[1:])):
        raise ValueError("delta_grid must be strictly decreasing with at least 3 points")
    direction = np.asarray(direction, dtype=np.float64)
    if direction.shape != (base.phi_dim,):
        raise DimensionMismatchError(
            f"direction must have the identifiable-block length {base.phi_dim}"
        )

    rng = np.random.default_rng(seed)
    X = x_sampler.sample(n_mc, rng)
    y = ctx.predict(X) + rng.normal(0.0, math.sqrt(ctx.sigma2), size=n_mc)

    phi0 = base.phi_base_vector()
    rows = []
    for delta in delta_grid:
        rep_d = base.with_phi_vector(phi0 + delta * direction)
        theta_d = rep_d.to_theta()
        ratio = density_ratio(theta_d, ctx, X, y)
        expansion = lemma1_expansion(rep_d, ctx, X, y)
        d_value = math.sqrt(float(np.mean((ratio - 1.0) ** 2)))
        remainder = math.sqrt(float(np.mean((ratio - expansion) ** 2)))
        flagged = d_value < _FIBER_D_EPS
        rows.append(
            RemainderRow(
                delta=delta,
                d_value=d_value,
                remainder=remainder,
                ratio=remainder / d_value if not flagged else float("nan"),
                flagged=flagged,
            )
        )
    return rows


def _h3_family(theta0: Theta, phi: TransferFunction, X: np.ndarray) -> np.ndarray:
    """Evaluate the second-order derivative family at the inputs.

    Per true unit i, in order: x_k x_l phi''(u_i) over the symmetric index
    pairs 1 <= l <= k <= d, then phi''(u_i), then x_k phi'(u_i) for
    k = 1..d, then phi'(u_i).
    """
    n, d = X.shape
    U = X @ theta0.W.T + theta0.b  # (n, k0)
    D1 = phi.d1(U)
    D2 = phi.d2(U)
    cols = []
    for i in range(theta0.k):
        for kk in range(d):
            for ll in range(kk + 1):
                cols.append(X[:, kk] * X[:, ll] * D2[:, i])
        cols.append(D2[:, i])
        for kk in range(d):
            cols.append(X[:, kk] * D1[:, i])
        cols.append(D1[:, i])
    return np.column_stack(cols)


def h3_family_size(k0: int, d: int) -> int:
    return k0 * (d * (d + 1) // 2 + 1 + d + 1)


def gauss_hermite_std_normal(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite rule for the standard normal weight (weights sum to 1).

    Computed by diagonalizing the Jacobi matrix of the probabilists'
    Hermite recurrence, which stays stable at high orders where the
    classical evaluation of the weights overflows.
    """
    J = np.zeros((n, n))
    off = np.sqrt(np.arange(1, n, dtype=np.float64))
    J[np.arange(n - 1), np.arange(1, n)] = off
    J[np.arange(1, n), np.arange(n - 1)] = off
    nodes, vecs = np.linalg.eigh(J)
    weights = vecs[0, :] ** 2
    return nodes, weights


def _gauss_hermite_nodes(mean: np.ndarray, sd: np.ndarray, n_nodes: int):
    """Tensor Gauss-Hermite grid for an independent Gaussian input law."""
    nodes, weights = gauss_hermite_std_normal(n_nodes)
    d = mean.shape[0]
    if d == 1:
        X = mean[0] + sd[0] * nodes[:, None]
        return X, weights
    grids = np.meshgrid(*[mean[j] + sd[j] * nodes for j in range(d)], indexing="ij")
    X = np.column_stack([g.ravel() for g in grids])
    wgrids = np.meshgrid(*[weights] * d, indexing="ij")
    w = np.ones(X.shape[0])
    for g in wgrids:
        w *= g.ravel()
    return X, w


def gram_matrix_H3(
    theta0: Theta,
    phi: TransferFunction,
    x_sampler,
    n_nodes: int = 200,
    seed=0,
) -> tuple[np.ndarray, float]:
    """Gram matrix of the derivative family in L2 of the input law, and its
    minimum eigenvalue.

    A strictly positive minimum eigenvalue certifies linear independence
    of the family (the key rank condition on the true model); duplicated
    true units make the family exactly dependent and drive the eigenvalue
    to zero. For a Gaussian input law in dimension 1 or 2 the expectation
    is computed by tensor Gauss-Hermite quadrature with ``n_nodes`` nodes
    per axis; otherwise plain Monte Carlo with ``n_nodes`` draws is used.
    """
    if n_nodes < 2:
        raise ValueError("n_nodes must be at least 2")
    is_gaussian = getattr(x_sampler, "kind", None) == "gaussian"
    if is_gaussian and theta0.d <= 2:
        X, w = _gauss_hermite_nodes(x_sampler.mean, x_sampler.sd, n_nodes)
    else:
        rng = np.random.default_rng(seed)
        X = x_sampler.sample(n_nodes, rng)
        w = np.full(X.shape[0], 1.0 / X.shape[0])

    fam = _h3_family(theta0, phi, X)
    G = (fam * w[:, None]).T @ fam
    G = 0.5 * (G + G.T)
    min_eig = float(np.linalg.eigvalsh(G)[0])
    return G, min_eig
