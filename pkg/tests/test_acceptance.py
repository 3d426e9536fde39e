"""Acceptance suite: one test per release criterion.

Each test prints a single PASS line once its assertions hold (run with
``pytest tests/test_acceptance.py -v -s`` to see them); an assertion
message carries the FAIL detail otherwise. The consistency experiment
(criteria 8-10) is executed through the CLI with the shipped
``configs/consistency_k2.json`` and is shared by its three criteria: one
run on two workers, one on three, compared byte for byte.
"""

import csv
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from mlparch import (
    LOGISTIC,
    TANH,
    Dataset,
    InputDist,
    OptConfig,
    PenaltySpec,
    RatioContext,
    Theta,
    ThetaSpace,
    build_reparam,
    check_H4,
    cond_loglik,
    cond_loglik_grad,
    d_norm,
    expansion_remainder_study,
    fit,
    generate,
    gram_matrix_H3,
    mlp_forward,
    nonident_witness,
)
from mlparch.theory import d_norm_stats
from oracles import brute_force_d2, fd_gradient, grid_search_k1, random_theta

REPO_ROOT = Path(__file__).resolve().parents[1]
CONSISTENCY_CONFIG = REPO_ROOT / "configs" / "consistency_k2.json"
STD_NORMAL = InputDist.gaussian([0.0], [1.0])


def report(cid: str, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {cid}: {status} ({detail})")
    assert ok, f"ACCEPTANCE {cid}: FAIL ({detail})"


def test_criterion_01_gradient_suite():
    """Analytic likelihood gradients match central differences, rtol 1e-6."""
    start = time.perf_counter()
    worst = 0.0
    for tf in (TANH, LOGISTIC):
        rng = np.random.default_rng(101 if tf is TANH else 202)
        for _ in range(100):
            k = int(rng.integers(1, 4))
            d = int(rng.integers(1, 4))
            theta = random_theta(rng, k, d)
            X = rng.normal(size=(20, d))
            y = mlp_forward(theta, tf, X) + rng.normal(0.0, 0.6, size=20)
            data = Dataset(X, y)
            sigma2 = float(rng.uniform(0.3, 1.5))

            def f(vec):
                return cond_loglik(Theta.from_vector(vec, k, d), tf, sigma2, data)

            analytic = cond_loglik_grad(theta, tf, sigma2, data)
            numeric = fd_gradient(f, theta.to_vector(), step=1e-5)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-8)
            tol = 1e-8 + 1e-6 * np.abs(numeric)
            worst = max(worst, float(np.max(np.abs(analytic - numeric) / tol)))
    elapsed = time.perf_counter() - start
    report(
        "criterion 1",
        elapsed < 10.0,
        f"200 instances, worst deviation {worst:.2f}x tolerance, {elapsed:.1f}s",
    )


def test_criterion_02_nonidentifiability_fiber():
    """Overparametrized witnesses realize the true regression function."""
    theta0 = Theta(0.3, [1.2, -0.8], [0.5, 1.2], [[1.5], [-2.0]])
    grid = np.linspace(-8.0, 8.0, 1000)[:, None]
    f0 = mlp_forward(theta0, TANH, grid)
    data = generate(theta0, TANH, 0.25, STD_NORMAL, 400, seed=42)
    ll0 = cond_loglik(theta0, TANH, 0.25, data)
    rng = np.random.default_rng(7)
    worst_grid = 0.0
    worst_ll = 0.0
    for i in range(100):
        k = int(rng.integers(3, 7))
        wit = nonident_witness(theta0, k, split_seed=1000 + i)
        worst_grid = max(worst_grid, float(np.max(np.abs(mlp_forward(wit, TANH, grid) - f0))))
        worst_ll = max(worst_ll, abs(cond_loglik(wit, TANH, 0.25, data) - ll0))
    report(
        "criterion 2",
        worst_grid <= 1e-12 and worst_ll <= 1e-9,
        f"100 witnesses, sup-grid error {worst_grid:.2e}, max loglik deviation {worst_ll:.2e}",
    )


def test_criterion_03_mle_grid_oracle():
    """Multistart fit reaches the dense-grid maximum on the small problem."""
    start = time.perf_counter()
    theta0 = Theta(0.2, [1.0], [0.4], [[1.1]])
    space = ThetaSpace(1, 1, bound=2.0, eta=0.5)
    worst = np.inf
    for rep in range(20):
        data = generate(theta0, TANH, 0.3, STD_NORMAL, 50, seed=7000 + rep)
        res = fit(data, space, TANH, 0.3, OptConfig(n_starts=20, base_seed=rep))
        worst = min(worst, res.loglik - grid_search_k1(data, space, 0.3))
    elapsed = time.perf_counter() - start
    report(
        "criterion 3",
        worst >= -1e-3 and elapsed < 120.0,
        f"20 datasets, worst margin over grid {worst:+.4f}, {elapsed:.1f}s",
    )


def test_criterion_04_closed_form_d_oracle():
    """Closed-form-in-y distance agrees with 2-D brute-force Monte Carlo."""
    theta0 = Theta(0.0, [1.0], [0.3], [[1.2]])
    sigma2 = 1.0
    ctx = RatioContext(theta0, TANH, sigma2)
    rng = np.random.default_rng(55)
    vec0 = theta0.to_vector()
    worst_sigma = 0.0
    for trial in range(20):
        theta = Theta.from_vector(vec0 + rng.uniform(-0.3, 0.3, size=vec0.size), 1, 1)
        d2, se_a = d_norm_stats(theta, ctx, STD_NORMAL, 200_000, seed=10_000 + trial)
        bf, se_b = brute_force_d2(theta, theta0, TANH, sigma2, STD_NORMAL, 200_000, seed=20_000 + trial)
        worst_sigma = max(worst_sigma, abs(d2 - bf) / math.hypot(se_a, se_b))
    c = 0.4
    shifted = Theta(theta0.beta + c, theta0.a, theta0.b, theta0.W)
    analytic = math.sqrt(math.exp(c * c / sigma2) - 1.0)
    value = d_norm(shifted, ctx, STD_NORMAL, 1_000_000, seed=3)
    const_rel = abs(value - analytic) / analytic
    report(
        "criterion 4",
        worst_sigma <= 3.0 and const_rel <= 1e-3,
        f"20 random models, worst |diff|/se {worst_sigma:.2f}; "
        f"constant-shift relative error {const_rel:.2e}",
    )


def test_criterion_05_lemma_remainder():
    """Expansion error vanishes faster than the ratio distance in every
    identifiable direction."""
    start = time.perf_counter()
    theta0 = Theta(0.0, [1.0], [0.3], [[1.2]])
    ctx = RatioContext(theta0, TANH, 1.0)
    witness = nonident_witness(theta0, 2, split_seed=0, splits=[[0.5, 0.5]])
    base = build_reparam(witness, theta0)
    failures = []
    for j in range(base.phi_dim):
        direction = np.zeros(base.phi_dim)
        direction[j] = 1.0
        rows = expansion_remainder_study(
            base, direction, [1e-1, 1e-2, 1e-3], ctx, STD_NORMAL, 20_000, seed=60 + j
        )
        ratios = [row.ratio for row in rows]
        if any(row.flagged for row in rows) or not all(
            b < a for a, b in zip(ratios, ratios[1:])
        ):
            failures.append((j, ratios))
    elapsed = time.perf_counter() - start
    report(
        "criterion 5",
        not failures and elapsed < 120.0,
        f"{base.phi_dim} directions, R/D strictly decreasing, {elapsed:.1f}s"
        if not failures
        else f"non-decreasing R/D in directions {failures}",
    )


def test_criterion_06_h3_gram_check():
    """Gram eigenvalue separates duplicated-unit and generic models."""
    dup = Theta(0.0, [1.0, 1.0], [0.3, 0.3], [[1.2], [1.2]])
    _, eig_dup = gram_matrix_H3(dup, TANH, STD_NORMAL, 200)
    generic = Theta(0.0, [1.0], [0.3], [[1.2]])
    _, eig_200 = gram_matrix_H3(generic, TANH, STD_NORMAL, 200)
    _, eig_400 = gram_matrix_H3(generic, TANH, STD_NORMAL, 400)
    stability = abs(eig_200 - eig_400) / eig_400
    report(
        "criterion 6",
        eig_dup <= 1e-10 and eig_200 > 1e-8 and stability <= 0.01,
        f"duplicated min eig {eig_dup:.2e}; generic {eig_200:.6e} "
        f"(200 vs 400 nodes: {stability:.2e} relative change)",
    )


def test_criterion_07_h4_checker():
    """Exact penalty-condition verdicts for the three reference penalties."""
    grid = [10, 100, 1000, 10000]
    pairs = [(2, 1), (3, 1), (4, 2)]
    bic = check_H4(PenaltySpec("bic"), 1, pairs, grid)
    aic = check_H4(PenaltySpec("aic_like"), 1, pairs, grid)
    linear = check_H4(PenaltySpec("custom", c=1.0, alpha=1.0), 1, pairs, grid)
    ok = (
        bic.overall_pass
        and aic.failed_conditions() == ["gap_divergence"]
        and linear.failed_conditions() == ["ratio_vanishes"]
    )
    report(
        "criterion 7",
        ok,
        f"bic={bic.failed_conditions()}, aic_like={aic.failed_conditions()}, "
        f"linear={linear.failed_conditions()}",
    )


# ---------------------------------------------------------------------------
# Criteria 8-10 share two full runs of the consistency experiment.
# ---------------------------------------------------------------------------

ARTIFACTS = ("experiment.json", "frequencies.csv", "consistency_curve.csv")


def _run_cli_mc(out_dir: Path, threads: int) -> None:
    cmd = [
        sys.executable,
        "-m",
        "mlparch.cli",
        "mc-consistency",
        "--config",
        str(CONSISTENCY_CONFIG),
        "--out",
        str(out_dir),
        "--threads",
        str(threads),
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True, cwd=REPO_ROOT)
    assert proc.returncode == 0, f"mc-consistency failed:\n{proc.stderr}"


@pytest.fixture(scope="module")
def mc_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("consistency")
    run_a = base / "threads2"
    run_b = base / "threads3"
    t0 = time.perf_counter()
    _run_cli_mc(run_a, threads=2)
    elapsed_a = time.perf_counter() - t0
    _run_cli_mc(run_b, threads=3)
    return run_a, run_b, elapsed_a


def _load_frequencies(out_dir: Path):
    table = {}
    with open(out_dir / "frequencies.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            table[(row["penalty"], int(row["n"]), int(row["k"]))] = float(row["frequency"])
    return table


def test_criterion_08_consistency_monte_carlo(mc_runs):
    """BIC recovers the true hidden-unit count as the sample grows."""
    run_a, _, elapsed = mc_runs
    doc = json.loads((run_a / "experiment.json").read_text())
    n_grid = doc["n_grid"]
    freqs = _load_frequencies(run_a)
    p_true = [freqs[("bic", n, 2)] for n in n_grid]
    inversions = [max(0.0, a - b) for a, b in zip(p_true, p_true[1:])]
    monotone_ok = sum(1 for v in inversions if v > 0) <= 1 and all(v <= 0.05 for v in inversions)
    failures = sum(cell["failures"] for cell in doc["counts"] if cell["penalty"] == "bic")
    failure_frac = failures / (doc["replications"] * len(n_grid))
    report(
        "criterion 8",
        monotone_ok and p_true[-1] >= 0.9 and failure_frac < 0.02,
        f"P(k_hat=2) = {p_true} over n = {n_grid}, failure fraction {failure_frac:.3f}, "
        f"{elapsed / 60.0:.1f} min on 2 workers",
    )


def test_criterion_09_negative_control(mc_runs):
    """The constant-gap penalty overestimates markedly more than BIC."""
    run_a, _, _ = mc_runs
    doc = json.loads((run_a / "experiment.json").read_text())
    n_max = doc["n_grid"][-1]
    freqs = _load_frequencies(run_a)
    over = {
        label: sum(freqs[(label, n_max, k)] for k in (3, 4))
        for label in ("bic", "aic_like")
    }
    gap = over["aic_like"] - over["bic"]
    report(
        "criterion 9",
        gap >= 0.1,
        f"overestimation at n={n_max}: aic_like {over['aic_like']:.2f} "
        f"vs bic {over['bic']:.2f} (gap {gap:+.2f})",
    )


def test_criterion_10_thread_count_determinism(mc_runs):
    """Identical result files regardless of worker parallelism."""
    run_a, run_b, _ = mc_runs
    mismatched = [
        name
        for name in ARTIFACTS
        if (run_a / name).read_bytes() != (run_b / name).read_bytes()
    ]
    report(
        "criterion 10",
        not mismatched,
        "all artifacts byte-identical between 2 and 3 workers"
        if not mismatched
        else f"artifacts differ: {mismatched}",
    )
