"""Constrained maximum likelihood over the compact parameter set.

The maximum of the log-likelihood over the feasible set is computed by a
multistart projected quasi-Newton ascent: a dense BFGS approximation of
the inverse Hessian produces the search direction, a backtracking line
search enforces monotone increase, and every accepted iterate is projected
back into the feasible set. The likelihood surface is multimodal (and
non-identifiable above the true hidden-unit count), so several independent
seeded starts are run and the best final value kept. Global optimality is
not certified; accuracy is checked against enumeration oracles in the test
suite.

Everything is deterministic given the optimizer configuration: start i
uses init seed ``base_seed + i`` and ties between equally good starts are
broken toward the lowest start index, so serial and parallel executions
agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import OptimizationFailure
from .model import Dataset, Theta
from .space import ThetaSpace, project_vector, sample_init
from .transfer import TransferFunction

_ARMIJO_C1 = 1e-4
_MAX_BACKTRACKS = 40
_CURVATURE_EPS = 1e-10


@dataclass(frozen=True)
class OptConfig:
    """Knobs of the multistart projected ascent."""

    n_starts: int = 20
    max_iters: int = 500
    grad_tol: float = 1e-6
    step_tol: float = 1e-12
    base_seed: int = 0

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not (self.grad_tol > 0.0 and self.step_tol > 0.0):
            raise ValueError("tolerances must be positive")


@dataclass
class FitResult:
    """Best constrained maximizer found for one hidden-unit count."""

    k: int
    loglik: float
    theta_hat: Theta
    n_starts_used: int
    converged_flags: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    start_logliks: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "loglik": self.loglik,
            "theta_hat": {
                "beta": self.theta_hat.beta,
                "a": self.theta_hat.a.tolist(),
                "b": self.theta_hat.b.tolist(),
                "W": self.theta_hat.W.tolist(),
            },
            "n_starts_used": self.n_starts_used,
            "converged_flags": self.converged_flags,
            "iterations": self.iterations,
            "start_logliks": self.start_logliks,
        }


class _Objective:
    """Likelihood callbacks on canonical parameter vectors."""

    def __init__(self, data: Dataset, space: ThetaSpace, phi: TransferFunction, sigma2: float):
        self.X = data.X
        self.y = data.y
        self.k = space.k
        self.d = space.d
        self.sigma2 = float(sigma2)
        self.code = phi.code

    def split(self, v):
        k, d = self.k, self.d
        return v[0], v[1 : 1 + k], v[1 + k : 1 + 2 * k], v[1 + 2 * k :].reshape(k, d)

    def value(self, v):
        beta, a, b, W = self.split(v)
        return kernels.loglik(beta, a, b, W, self.X, self.y, self.sigma2, self.code)

    def value_and_grad(self, v):
        beta, a, b, W = self.split(v)
        return kernels.loglik_grad(beta, a, b, W, self.X, self.y, self.sigma2, self.code)


def _ascend(obj: _Objective, space: ThetaSpace, v0: np.ndarray, cfg: OptConfig):
    """One projected BFGS ascent. Returns (loglik, v, converged, iters)."""
    v = project_vector(np.ascontiguousarray(v0, dtype=np.float64), space)
    ll, g = obj.value_and_grad(v)
    if not np.isfinite(ll) or not np.all(np.isfinite(g)):
        return -np.inf, v, False, 0

    dim = v.shape[0]
    eye = np.eye(dim)
    H = eye / max(1.0, np.max(np.abs(g)))
    scaled = False
    converged = False
    iters = 0

    for iters in range(1, cfg.max_iters + 1):
        residual = np.max(np.abs(project_vector(v + g, space) - v))
        if residual <= cfg.grad_tol:
            converged = True
            iters -= 1
            break

        p = H @ g
        if p @ g <= 1e-14 * np.linalg.norm(p) * np.linalg.norm(g):
            # Not an ascent direction; reset the curvature model.
            H = eye / max(1.0, np.max(np.abs(g)))
            scaled = False
            p = H @ g

        alpha = 1.0
        trial = None
        ll_trial = None
        for _ in range(_MAX_BACKTRACKS):
            cand = project_vector(v + alpha * p, space)
            step = cand - v
            step_inf = np.max(np.abs(step))
            if step_inf == 0.0:
                alpha *= 0.5
                continue
            ll_cand = obj.value(cand)
            if np.isfinite(ll_cand) and ll_cand >= ll + _ARMIJO_C1 * max(g @ step, 0.0) and ll_cand > ll:
                trial, ll_trial = cand, ll_cand
                break
            alpha *= 0.5
        if trial is None:
            break  # line search stalled; keep the current point

        ll_new, g_new = obj.value_and_grad(trial)
        if not np.isfinite(ll_new) or not np.all(np.isfinite(g_new)):
            return -np.inf, v, False, iters

        s = trial - v
        yf = g - g_new  # gradient change of the negated objective
        sy = s @ yf
        if sy > _CURVATURE_EPS * np.linalg.norm(s) * np.linalg.norm(yf):
            if not scaled:
                H = eye * (sy / (yf @ yf))
                scaled = True
            rho = 1.0 / sy
            Hy = H @ yf
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + rho * (rho * (yf @ Hy) + 1.0) * np.outer(s, s)

        small_step = np.max(np.abs(s)) <= cfg.step_tol
        v, ll, g = trial, ll_new, g_new
        if small_step:
            break

    return ll, v, converged, iters


def fit(
    data: Dataset,
    space: ThetaSpace,
    phi: TransferFunction,
    sigma2: float,
    cfg: OptConfig,
    extra_inits=(),
) -> FitResult:
    """Maximize the log-likelihood over the feasible k-unit parameter set.

    Runs ``cfg.n_starts`` independent ascents from seeded uniform starts
    (seed = base_seed + start index), plus one ascent per entry of
    ``extra_inits`` (used for warm starts). A start that hits a non-finite
    likelihood is abandoned and flagged; if every start fails,
    :class:`~mlparch.errors.OptimizationFailure` is raised.
    """
    if data.d != space.d:
        raise ValueError(f"data dimension {data.d} does not match space dimension {space.d}")
    obj = _Objective(data, space, phi, sigma2)

    inits = [sample_init(space, cfg.base_seed + s).to_vector() for s in range(cfg.n_starts)]
    for extra in extra_inits:
        vec = extra.to_vector() if isinstance(extra, Theta) else np.asarray(extra, dtype=np.float64)
        inits.append(vec)

    best_ll = -np.inf
    best_v = None
    flags = []
    iterations = []
    start_lls = []
    for v0 in inits:
        ll, v, conv, iters = _ascend(obj, space, v0, cfg)
        flags.append(bool(conv))
        iterations.append(int(iters))
        start_lls.append(float(ll))
        if ll > best_ll:
            best_ll, best_v = ll, v

    if best_v is None or not np.isfinite(best_ll):
        raise OptimizationFailure(
            f"all {len(inits)} starts failed with non-finite likelihood (k={space.k})"
        )

    theta_hat = Theta.from_vector(best_v, space.k, space.d)
    # Re-evaluate so the reported value is exactly the likelihood at theta_hat.
    loglik = obj.value(best_v)
    return FitResult(
        k=space.k,
        loglik=float(loglik),
        theta_hat=theta_hat,
        n_starts_used=len(inits),
        converged_flags=flags,
        iterations=iterations,
        start_logliks=start_lls,
    )


def _warm_seed(base_seed: int, k: int) -> int:
    return int(np.random.SeedSequence([base_seed & 0xFFFFFFFF, k, 0x57]).generate_state(1)[0])


def _embed(theta: Theta, space: ThetaSpace, seed: int) -> Theta:
    """Embed a (k-1)-unit solution into the k-unit space.

    The new unit gets zero output weight and a feasibly sampled (b, w), so
    the embedded point realizes exactly the same regression function.
    """
    unit = sample_init(ThetaSpace(1, space.d, space.bound, space.eta, space.sign_convention), seed)
    return Theta(
        theta.beta,
        np.concatenate([theta.a, [0.0]]),
        np.concatenate([theta.b, unit.b]),
        np.vstack([theta.W, unit.W]),
    )


def profile_fit(
    data: Dataset,
    spaces,
    phi: TransferFunction,
    sigma2: float,
    cfg: OptConfig,
) -> list[FitResult]:
    """Fit every hidden-unit count k = 1..M and return one result per k.

    ``spaces`` is the list of feasible sets in increasing k order. Each fit
    after the first adds one warm start: the previous solution embedded
    with an extra zero-output-weight unit, exploiting the exact nesting of
    the model families.
    """
    spaces = list(spaces)
    if not spaces:
        raise ValueError("at least one space is required")
    for pos, space in enumerate(spaces, start=1):
        if space.k != pos:
            raise ValueError(f"spaces must cover k = 1..M in order; entry {pos} has k={space.k}")

    results: list[FitResult] = []
    for space in spaces:
        extra = []
        if results:
            extra.append(_embed(results[-1].theta_hat, space, _warm_seed(cfg.base_seed, space.k)))
        results.append(fit(data, space, phi, sigma2, cfg, extra_inits=extra))
    return results
