"""Data generation and replicated consistency experiments.

A replication draws inputs from a configured distribution, adds Gaussian
noise to the true regression function, fits every hidden-unit count up to
M, and selects k with each configured penalty. Replications are seeded by
a splittable scheme keyed on (base seed, sample-size index, replication
index), so the result does not depend on how the work is scheduled and any
worker count reproduces identical output.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import OptimizationFailure
from .mle import OptConfig, profile_fit
from .model import Dataset, Theta, mlp_forward
from .selection import select
from .space import ThetaSpace
from .transfer import TransferFunction


@dataclass(frozen=True)
class InputDist:
    """Input distribution for the regressors.

    ``gaussian`` has positive density on all of R^d and a finite sixth
    moment, matching the assumptions of the consistency theory. ``uniform``
    also has all moments but its density is positive only on its box; it
    is provided for experimentation and flagged as a documented deviation.
    """

    kind: str
    mean: np.ndarray | None = None
    sd: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.mean is None or self.sd is None:
                raise ValueError("gaussian input distribution requires mean and sd")
            object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=np.float64)))
            object.__setattr__(self, "sd", np.atleast_1d(np.asarray(self.sd, dtype=np.float64)))
            if self.mean.shape != self.sd.shape or self.mean.ndim != 1:
                raise ValueError("mean and sd must be vectors of equal length")
            if np.any(self.sd <= 0.0):
                raise ValueError("all coordinate standard deviations must be positive")
        elif self.kind == "uniform":
            if self.lo is None or self.hi is None:
                raise ValueError("uniform input distribution requires lo and hi")
            object.__setattr__(self, "lo", np.atleast_1d(np.asarray(self.lo, dtype=np.float64)))
            object.__setattr__(self, "hi", np.atleast_1d(np.asarray(self.hi, dtype=np.float64)))
            if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
                raise ValueError("lo and hi must be vectors of equal length")
            if np.any(self.hi <= self.lo):
                raise ValueError("hi must exceed lo in every coordinate")
        else:
            raise ValueError(f"unknown input distribution kind {self.kind!r}")

    @classmethod
    def gaussian(cls, mean, sd) -> "InputDist":
        return cls(kind="gaussian", mean=mean, sd=sd)

    @classmethod
    def uniform(cls, lo, hi) -> "InputDist":
        return cls(kind="uniform", lo=lo, hi=hi)

    @property
    def d(self) -> int:
        return self.mean.shape[0] if self.kind == "gaussian" else self.lo.shape[0]

    @property
    def everywhere_positive(self) -> bool:
        """Whether the density is positive on all of R^d."""
        return self.kind == "gaussian"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.normal(self.mean, self.sd, size=(n, self.d))
        return rng.uniform(self.lo, self.hi, size=(n, self.d))


def generate(
    theta0: Theta,
    phi: TransferFunction,
    sigma2: float,
    dist: InputDist,
    n: int,
    seed,
) -> Dataset:
    """Draw n i.i.d. pairs with y = F(x) + Gaussian noise; deterministic in seed."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not sigma2 > 0.0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    if dist.d != theta0.d:
        raise ValueError(f"input distribution has dimension {dist.d}, model expects {theta0.d}")
    rng = np.random.default_rng(seed)
    X = dist.sample(n, rng)
    y = mlp_forward(theta0, phi, X) + rng.normal(0.0, math.sqrt(sigma2), size=n)
    return Dataset(X=X, y=y)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one consistency experiment."""

    theta0: Theta
    phi: TransferFunction
    sigma2: float
    input_dist: InputDist
    n_grid: tuple
    replications: int
    M: int
    penalties: tuple
    opt: OptConfig = OptConfig()
    base_seed: int = 0
    bound: float = 10.0
    eta: float = 0.1
    sign_convention: bool = True

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "penalties", tuple(self.penalties))
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])) or not self.n_grid:
            raise ValueError("n_grid must be nonempty and strictly increasing")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.M < self.theta0.k:
            raise ValueError(f"M={self.M} is smaller than the true hidden-unit count {self.theta0.k}")
        if not self.penalties:
            raise ValueError("at least one penalty spec is required")
        labels = [p.label for p in self.penalties]
        if len(set(labels)) != len(labels):
            raise ValueError("penalty specs must be distinct")

    def spaces(self):
        return [
            ThetaSpace(k, self.theta0.d, self.bound, self.eta, self.sign_convention)
            for k in range(1, self.M + 1)
        ]


@dataclass
class ReplicationRecord:
    """Outcome of a single (n, replication) cell; fits are shared across
    penalties."""

    n: int
    r: int
    data_seed: int
    logliks: list  # per k = 1..M; empty when failed
    k_hat: dict  # penalty label -> selected k
    failed: bool = False
    error: str = ""

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "data_seed": self.data_seed,
            "logliks": self.logliks,
            "k_hat": self.k_hat,
            "failed": self.failed,
            "error": self.error,
        }


@dataclass
class ExperimentResult:
    """Replication records plus tallies of the selected k.

    ``elapsed_seconds`` is runtime metadata and deliberately excluded from
    :meth:`to_json_dict`, which must be byte-reproducible for identical
    configurations regardless of worker count.
    """

    n_grid: tuple
    M: int
    replications: int
    penalty_labels: list
    base_seed: int
    records: list = field(default_factory=list)
    elapsed_seconds: float = 0.0

    def counts(self) -> dict:
        """(penalty label, n) -> {k: count}; failures excluded."""
        out = {}
        for label in self.penalty_labels:
            for n in self.n_grid:
                out[(label, n)] = {k: 0 for k in range(1, self.M + 1)}
        for rec in self.records:
            if rec.failed:
                continue
            for label, k_hat in rec.k_hat.items():
                out[(label, rec.n)][k_hat] += 1
        return out

    def failures(self) -> dict:
        """n -> number of failed replications."""
        out = {n: 0 for n in self.n_grid}
        for rec in self.records:
            if rec.failed:
                out[rec.n] += 1
        return out

    def failure_fraction(self) -> float:
        total = len(self.records)
        return sum(self.failures().values()) / total if total else 0.0

    def to_json_dict(self) -> dict:
        counts = self.counts()
        return {
            "n_grid": list(self.n_grid),
            "M": self.M,
            "replications": self.replications,
            "penalties": list(self.penalty_labels),
            "base_seed": self.base_seed,
            "counts": [
                {
                    "penalty": label,
                    "n": n,
                    "counts": {str(k): c for k, c in sorted(counts[(label, n)].items())},
                    "failures": self.failures()[n],
                }
                for label in self.penalty_labels
                for n in self.n_grid
            ],
            "replications_detail": [r.to_json_dict() for r in self.records],
        }


def _cell_seeds(base_seed: int, n_idx: int, r: int) -> tuple[int, int]:
    """Splittable per-cell seeds: schedule order cannot influence them."""
    root = np.random.SeedSequence([base_seed & 0xFFFFFFFF, n_idx, r])
    data_seed, opt_seed = (int(v) for v in root.generate_state(2))
    return data_seed, opt_seed


def _run_cell(cfg: ExperimentConfig, n_idx: int, r: int) -> ReplicationRecord:
    n = cfg.n_grid[n_idx]
    data_seed, opt_seed = _cell_seeds(cfg.base_seed, n_idx, r)
    data = generate(cfg.theta0, cfg.phi, cfg.sigma2, cfg.input_dist, n, data_seed)
    opt = OptConfig(
        n_starts=cfg.opt.n_starts,
        max_iters=cfg.opt.max_iters,
        grad_tol=cfg.opt.grad_tol,
        step_tol=cfg.opt.step_tol,
        base_seed=opt_seed,
    )
    try:
        profile = profile_fit(data, cfg.spaces(), cfg.phi, cfg.sigma2, opt)
    except OptimizationFailure as exc:
        return ReplicationRecord(
            n=n, r=r, data_seed=data_seed, logliks=[], k_hat={}, failed=True, error=str(exc)
        )
    k_hat = {
        spec.label: select(profile, spec, n, cfg.theta0.d).k_hat for spec in cfg.penalties
    }
    return ReplicationRecord(
        n=n,
        r=r,
        data_seed=data_seed,
        logliks=[res.loglik for res in profile],
        k_hat=k_hat,
    )


def _cell_worker(args) -> tuple[int, int, ReplicationRecord]:
    cfg, n_idx, r = args
    return n_idx, r, _run_cell(cfg, n_idx, r)


def run_consistency_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Run all replications of the experiment and tally the selected k.

    ``threads`` bounds the number of worker processes; the output is
    identical for every value because each (n, replication) cell is
    independently seeded and the records are assembled in a fixed order.
    Cells whose optimizer fails on every start are recorded as failed and
    excluded from the tallies.
    """
    start = time.perf_counter()
    tasks = [(cfg, n_idx, r) for n_idx in range(len(cfg.n_grid)) for r in range(cfg.replications)]
    results: dict[tuple[int, int], ReplicationRecord] = {}
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for n_idx, r, rec in pool.map(_cell_worker, tasks, chunksize=4):
                results[(n_idx, r)] = rec
    else:
        for task in tasks:
            n_idx, r, rec = _cell_worker(task)
            results[(n_idx, r)] = rec

    records = [results[key] for key in sorted(results)]
    return ExperimentResult(
        n_grid=cfg.n_grid,
        M=cfg.M,
        replications=cfg.replications,
        penalty_labels=[p.label for p in cfg.penalties],
        base_seed=cfg.base_seed,
        records=records,
        elapsed_seconds=time.perf_counter() - start,
    )


@dataclass
class FrequencyRow:
    penalty: str
    n: int
    k: int
    frequency: float


def summarize(result: ExperimentResult) -> list:
    """Empirical selection frequencies P(k_hat = k) per (penalty, n).

    Frequencies are counts divided by the number of replications, so the
    rows of a cell sum to one minus the failure mass. Returns an empty
    list (with a warning) when every replication failed.
    """
    if result.records and all(rec.failed for rec in result.records):
        warnings.warn("all replications failed; the frequency table is empty", stacklevel=2)
        return []
    counts = result.counts()
    rows = []
    for label in result.penalty_labels:
        for n in result.n_grid:
            for k in range(1, result.M + 1):
                rows.append(
                    FrequencyRow(
                        penalty=label,
                        n=n,
                        k=k,
                        frequency=counts[(label, n)][k] / result.replications,
                    )
                )
    return rows


def frequency_of_true_k(result: ExperimentResult, k0: int) -> dict:
    """(penalty label, n) -> empirical P(k_hat = k0)."""
    counts = result.counts()
    return {
        (label, n): counts[(label, n)][k0] / result.replications
        for label in result.penalty_labels
        for n in result.n_grid
    }
