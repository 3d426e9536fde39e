"""The compact constraint set for the model parameters.

Compactness is realized as a coordinate box [-B, B]. Two further
constraints remove the classical degeneracies of the model:

* every input-weight row must satisfy ||w_i||_2 >= eta > 0, so no hidden
  unit collapses to a constant that would be confounded with the output
  bias;
* optionally all hidden biases are constrained to b_i >= 0, which removes
  the sign symmetry of (a_i, b_i, w_i) for odd/sigmoidal transfer
  functions and makes the weak identifiability assumption hold.

The projection used by the optimizer is clip-then-rescale: it always
produces a feasible point but is not the Euclidean nearest point of the
non-convex set, which is all the fitting loop needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InfeasibleSpaceError
from .model import Theta

# Relative slack when comparing ||w_i|| against eta, so that a radially
# rescaled row (norm eta up to rounding) is both a member and a fixed
# point of the projection.
_ETA_RTOL = 1e-12


@dataclass(frozen=True)
class ThetaSpace:
    """Constraint set for a k-unit model on R^d inputs.

    Attributes
    ----------
    k, d : int
        Hidden-unit count and input dimension.
    bound : float
        Box half-width B; every coordinate of theta lies in [-B, B].
    eta : float
        Lower bound on the Euclidean norm of each input-weight row.
    sign_convention : bool
        If set, hidden biases are additionally constrained to b_i >= 0.
    """

    k: int
    d: int
    bound: float = 10.0
    eta: float = 0.1
    sign_convention: bool = True

    def __post_init__(self):
        if self.k < 1 or self.d < 1:
            raise InfeasibleSpaceError("k and d must be at least 1")
        if not self.bound > 0.0:
            raise InfeasibleSpaceError(f"bound must be positive, got {self.bound}")
        if not self.eta > 0.0:
            raise InfeasibleSpaceError(f"eta must be positive, got {self.eta}")
        if self.eta > self.bound * math.sqrt(self.d):
            raise InfeasibleSpaceError(
                f"eta={self.eta} exceeds bound*sqrt(d)={self.bound * math.sqrt(self.d)}; "
                "the feasible set is empty"
            )

    @property
    def dim(self) -> int:
        return 2 * self.k + 1 + self.k * self.d

    def for_k(self, k: int) -> "ThetaSpace":
        """Same geometry with a different hidden-unit count."""
        return ThetaSpace(k, self.d, self.bound, self.eta, self.sign_convention)

    def contains(self, theta: Theta) -> bool:
        """Membership test (with a tiny relative slack on the eta bound)."""
        if theta.k != self.k or theta.d != self.d:
            return False
        B = self.bound
        if abs(theta.beta) > B:
            return False
        for arr in (theta.a, theta.b, theta.W):
            if np.any(np.abs(arr) > B):
                return False
        if self.sign_convention and np.any(theta.b < 0.0):
            return False
        norms = np.linalg.norm(theta.W, axis=1)
        return bool(np.all(norms >= self.eta * (1.0 - _ETA_RTOL)))


def _check_shapes(theta: Theta, space: ThetaSpace) -> None:
    if theta.k != space.k or theta.d != space.d:
        raise DimensionMismatchError(
            f"theta has (k={theta.k}, d={theta.d}) but the space expects "
            f"(k={space.k}, d={space.d})"
        )


def _check_projectable(space: ThetaSpace) -> None:
    # Radial rescaling can push a coordinate up to eta in magnitude, so the
    # clip-then-rescale composition is only guaranteed feasible and
    # idempotent when eta <= bound.
    if space.eta > space.bound:
        raise InfeasibleSpaceError(
            f"projection requires eta <= bound, got eta={space.eta} > bound={space.bound}"
        )


def project_vector(vec: np.ndarray, space: ThetaSpace) -> np.ndarray:
    """Project a canonical parameter vector into the feasible set (copy)."""
    _check_projectable(space)
    k, d, B = space.k, space.d, space.bound
    out = np.clip(vec, -B, B)
    if space.sign_convention:
        np.clip(out[1 + k : 1 + 2 * k], 0.0, B, out=out[1 + k : 1 + 2 * k])
    W = out[1 + 2 * k :].reshape(k, d)
    norms = np.linalg.norm(W, axis=1)
    for i in np.flatnonzero(norms < space.eta * (1.0 - _ETA_RTOL)):
        if norms[i] == 0.0:
            W[i, 0] = space.eta
        else:
            W[i] *= space.eta / norms[i]
    return out


def project(theta: Theta, space: ThetaSpace) -> Theta:
    """Map theta to a member of the space.

    Coordinates are clipped to the box (biases to [0, B] under the sign
    convention), then each input-weight row with ||w_i|| < eta is rescaled
    radially to norm eta; an exactly zero row is replaced by eta times the
    first canonical basis vector. Idempotent, and the identity on feasible
    points.
    """
    _check_shapes(theta, space)
    vec = project_vector(theta.to_vector(), space)
    return Theta.from_vector(vec, space.k, space.d)


def sample_init(space: ThetaSpace, rng_seed) -> Theta:
    """Draw theta uniformly on the box, then project into the space."""
    _check_projectable(space)
    rng = np.random.default_rng(rng_seed)
    vec = rng.uniform(-space.bound, space.bound, size=space.dim)
    return Theta.from_vector(project_vector(vec, space), space.k, space.d)


def nonident_witness(
    theta0: Theta,
    k: int,
    split_seed,
    space: ThetaSpace | None = None,
    splits=None,
) -> Theta:
    """An overparametrized theta in the k-unit space realizing the same
    regression function as ``theta0``.

    Each true unit is duplicated into a group sharing its (b, w), with the
    output weight divided among the group by positive proportions summing
    to one; any remaining surplus units get zero output weight and
    arbitrary feasible (b, w). The construction draws group sizes and
    proportions from ``split_seed`` unless ``splits`` pins them explicitly
    (one proportion sequence per true unit).

    Parameters
    ----------
    theta0 : Theta
        The true parameter; must be feasible for ``space`` at its own k.
    k : int
        Hidden-unit count of the witness, strictly larger than theta0.k.
    split_seed : int
        Seed for the random grouping and proportions.
    space : ThetaSpace, optional
        Geometry of the target space (defaults shared with ``theta0``).
    splits : sequence of sequences, optional
        Explicit positive proportions per true unit; lengths set the group
        sizes and each sequence must sum to 1.
    """
    k0 = theta0.k
    if k <= k0:
        raise ValueError(f"witness needs k > theta0.k, got k={k} <= {k0}")
    if space is None:
        space = ThetaSpace(k, theta0.d)
    else:
        space = space.for_k(k)
    if not space.for_k(k0).contains(theta0):
        raise InfeasibleSpaceError("theta0 is not a member of the corresponding space")

    rng = np.random.default_rng(split_seed)
    if splits is not None:
        groups = [np.asarray(s, dtype=np.float64) for s in splits]
        if len(groups) != k0:
            raise ValueError(f"splits must provide one sequence per true unit ({k0})")
        for s in groups:
            if np.any(s <= 0.0) or abs(s.sum() - 1.0) > 1e-9:
                raise ValueError("each split must be positive and sum to 1")
        total = sum(len(s) for s in groups)
        if total > k:
            raise ValueError(f"splits use {total} units but only {k} are available")
    else:
        # Random number of duplicated units in [k0, k], spread over groups.
        total = int(rng.integers(k0, k + 1))
        sizes = np.ones(k0, dtype=int)
        for _ in range(total - k0):
            sizes[rng.integers(0, k0)] += 1
        groups = [rng.dirichlet(np.ones(m)) if m > 1 else np.array([1.0]) for m in sizes]

    a = []
    b = []
    W = []
    for i, props in enumerate(groups):
        for q in props:
            a.append(q * theta0.a[i])
            b.append(theta0.b[i])
            W.append(theta0.W[i])
    n_surplus = k - total
    if n_surplus > 0:
        unit_space = ThetaSpace(1, theta0.d, space.bound, space.eta, space.sign_convention)
        for j in range(n_surplus):
            extra = sample_init(unit_space, rng.integers(0, 2**63 - 1))
            a.append(0.0)
            b.append(extra.b[0])
            W.append(extra.W[0])
    return Theta(theta0.beta, np.array(a), np.array(b), np.array(W))
