"""Command-line interface.

Subcommands cover the full pipeline: ``gen-data`` writes a dataset CSV,
``fit`` maximizes the likelihood for one hidden-unit count, ``select``
profiles k = 1..M and applies the penalized criterion, ``mc-consistency``
runs the replicated selection experiment, and ``verify-lemma`` /
``check-ident`` / ``check-penalty`` run the theory checks. All commands
read one JSON configuration document (see :mod:`mlparch.config`) and write
their artifacts into ``--out``; identical configuration and seeds
reproduce every artifact byte for byte.

Exit status: 0 on success, 1 on a validation error (bad configuration or
inputs), 2 on a runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .errors import InvalidConfigError, MlparchError, OptimizationFailure
from .mle import fit as mle_fit
from .mle import profile_fit
from .model import Dataset
from .selection import check_H4, select
from .sim import ExperimentConfig, generate, run_consistency_experiment, summarize
from .space import nonident_witness
from .theory import (
    DEFAULT_H3_TOL,
    RatioContext,
    build_reparam,
    expansion_remainder_study,
    gram_matrix_H3,
)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _parse_and_validate(raw: str):
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InvalidConfigError([(f"line {exc.lineno}", exc.msg)]) from None
    cfgmod.validate_document(doc)
    return doc


def _read_dataset(path: str) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1] != "y" or len(header) < 2:
            raise InvalidConfigError([(path, "dataset CSV must have header x1,...,xd,y")])
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise InvalidConfigError([(path, "dataset CSV contains no rows")])
    arr = np.asarray(rows, dtype=np.float64)
    return Dataset(X=arr[:, :-1], y=arr[:, -1])


def _report_config_error(exc: InvalidConfigError, config_path: str, raw: str | None) -> None:
    entries = exc.args[0] if exc.args and isinstance(exc.args[0], list) else [("", str(exc))]
    for path, msg in entries:
        line = cfgmod.key_line(raw, path) if raw else None
        loc = f"{config_path}:{line}" if line else config_path
        print(f"{loc}: {path}: {msg}" if path else f"{loc}: {msg}", file=sys.stderr)


def _sigma2(doc) -> float:
    cfgmod.require_sections(doc, ["sigma2"])
    return float(doc["sigma2"])


def cmd_gen_data(args, doc) -> int:
    cfgmod.require_sections(doc, ["model", "input_dist", "data"])
    theta0 = cfgmod.build_theta(doc)
    dist = cfgmod.build_input_dist(doc)
    phi = cfgmod.build_transfer(doc)
    sigma2 = _sigma2(doc)
    n = doc["data"]["n"]
    seed = args.seed if args.seed is not None else doc["data"].get("seed", 0)
    data = generate(theta0, phi, sigma2, dist, n, seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = [f"x{j + 1}" for j in range(data.d)] + ["y"]
    rows = [list(data.X[i]) + [data.y[i]] for i in range(data.n)]
    _write_csv(out / "dataset.csv", header, rows)
    print(f"wrote {out / 'dataset.csv'} ({data.n} samples, d={data.d})")
    return 0


def cmd_fit(args, doc) -> int:
    cfgmod.require_sections(doc, ["fit"])
    if "k" not in doc["fit"]:
        raise InvalidConfigError([("fit.k", "fit requires the hidden-unit count k")])
    data = _read_dataset(args.data)
    phi = cfgmod.build_transfer(doc)
    sigma2 = _sigma2(doc)
    k = doc["fit"]["k"]
    space = cfgmod.build_space(doc, k, data.d)
    opt = cfgmod.build_opt(doc["fit"], seed_override=args.seed)
    result = mle_fit(data, space, phi, sigma2, opt)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "fit_result.json", result.to_json_dict())
    print(f"k={k}: loglik={result.loglik:.6f} ({result.n_starts_used} starts)")
    return 0


def cmd_select(args, doc) -> int:
    cfgmod.require_sections(doc, ["select"])
    sel = doc["select"]
    if "M" not in sel:
        raise InvalidConfigError([("select.M", "select requires the maximal hidden-unit count M")])
    data = _read_dataset(args.data)
    phi = cfgmod.build_transfer(doc)
    sigma2 = _sigma2(doc)
    spaces = [cfgmod.build_space(doc, k, data.d) for k in range(1, sel["M"] + 1)]
    opt = cfgmod.build_opt(doc.get("fit", {}), seed_override=args.seed)
    penalty = cfgmod.build_penalty(sel.get("penalty", {"kind": "bic"}))

    profile = profile_fit(data, spaces, phi, sigma2, opt)
    result = select(profile, penalty, data.n, data.d)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "selection.json", result.to_json_dict())
    _write_csv(
        out / "selection_table.csv",
        ["k", "loglik", "penalty", "t_n"],
        [[row.k, row.loglik, row.penalty, row.t_n] for row in result.table],
    )
    print(f"selected k_hat={result.k_hat} with penalty {penalty.label} (n={data.n})")
    return 0


def cmd_mc_consistency(args, doc) -> int:
    cfgmod.require_sections(doc, ["model", "input_dist", "experiment"])
    exp = doc["experiment"]
    for req in ("n_grid", "replications", "M"):
        if req not in exp:
            raise InvalidConfigError([(f"experiment.{req}", f"experiment requires {req!r}")])
    theta0 = cfgmod.build_theta(doc)
    base_seed = args.seed if args.seed is not None else exp.get("base_seed", 0)
    space = doc.get("space", {})
    cfg = ExperimentConfig(
        theta0=theta0,
        phi=cfgmod.build_transfer(doc),
        sigma2=_sigma2(doc),
        input_dist=cfgmod.build_input_dist(doc),
        n_grid=tuple(exp["n_grid"]),
        replications=exp["replications"],
        M=exp["M"],
        penalties=tuple(cfgmod.build_penalty(p) for p in exp.get("penalties", [{"kind": "bic"}])),
        opt=cfgmod.build_opt(exp),
        base_seed=base_seed,
        bound=space.get("bound", 10.0),
        eta=space.get("eta", 0.1),
        sign_convention=space.get("sign_convention", True),
    )
    result = run_consistency_experiment(cfg, threads=args.threads)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "experiment.json", result.to_json_dict())
    _write_csv(
        out / "frequencies.csv",
        ["penalty", "n", "k", "frequency"],
        [[row.penalty, row.n, row.k, row.frequency] for row in summarize(result)],
    )
    k0 = theta0.k
    counts = result.counts()
    _write_csv(
        out / "consistency_curve.csv",
        ["penalty", "n", "p_true_k"],
        [
            [label, n, counts[(label, n)][k0] / cfg.replications]
            for label in result.penalty_labels
            for n in cfg.n_grid
        ],
    )
    print(
        f"finished {cfg.replications} replications x {len(cfg.n_grid)} sample sizes "
        f"in {result.elapsed_seconds:.1f}s "
        f"(failures: {sum(result.failures().values())})",
        file=sys.stderr,
    )
    print(f"wrote experiment.json, frequencies.csv, consistency_curve.csv to {out}")
    return 0


def cmd_verify_lemma(args, doc) -> int:
    cfgmod.require_sections(doc, ["model", "input_dist"])
    theta0 = cfgmod.build_theta(doc)
    phi = cfgmod.build_transfer(doc)
    sigma2 = _sigma2(doc)
    dist = cfgmod.build_input_dist(doc)
    lem = doc.get("lemma", {})
    ambient_k = lem.get("ambient_k", theta0.k + 1)
    if ambient_k <= theta0.k:
        raise InvalidConfigError([("lemma.ambient_k", "ambient_k must exceed the model's k")])
    delta_grid = lem.get("delta_grid", [1e-1, 1e-2, 1e-3])
    n_mc = lem.get("n_mc", 20000)
    seed = args.seed if args.seed is not None else lem.get("seed", 0)

    # Deterministic fiber point: the first true unit is split evenly over
    # the extra capacity, the others stay singleton groups.
    m = ambient_k - theta0.k + 1
    splits = [[1.0 / m] * m] + [[1.0]] * (theta0.k - 1)
    space = cfgmod.build_space(doc, ambient_k, theta0.d)
    witness = nonident_witness(theta0, ambient_k, split_seed=0, space=space, splits=splits)
    base = build_reparam(witness, theta0)
    ctx = RatioContext(theta0, phi, sigma2)

    rows = []
    for j in range(base.phi_dim):
        direction = np.zeros(base.phi_dim)
        direction[j] = 1.0
        for row in expansion_remainder_study(base, direction, delta_grid, ctx, dist, n_mc, seed):
            rows.append([j, row.delta, row.d_value, row.remainder, row.ratio, row.flagged])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "lemma_remainder.csv",
        ["direction", "delta", "D", "R", "R_over_D", "flagged"],
        rows,
    )
    print(f"wrote {out / 'lemma_remainder.csv'} ({base.phi_dim} directions)")
    return 0


def cmd_check_ident(args, doc) -> int:
    cfgmod.require_sections(doc, ["model", "input_dist"])
    theta0 = cfgmod.build_theta(doc)
    phi = cfgmod.build_transfer(doc)
    dist = cfgmod.build_input_dist(doc)
    gr = doc.get("gram", {})
    n_nodes = gr.get("n_nodes", 200)
    tol = gr.get("tol", DEFAULT_H3_TOL)
    seed = args.seed if args.seed is not None else gr.get("seed", 0)

    G, min_eig = gram_matrix_H3(theta0, phi, dist, n_nodes, seed=seed)
    _, min_eig_hi = gram_matrix_H3(theta0, phi, dist, 2 * n_nodes, seed=seed)
    verdict = "pass" if min_eig > tol else "fail"

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "gram_matrix.csv",
        ["row", "col", "value"],
        [[i, j, G[i, j]] for i in range(G.shape[0]) for j in range(G.shape[1])],
    )
    _write_json(
        out / "h3_report.json",
        {
            "family_size": G.shape[0],
            "n_nodes": n_nodes,
            "min_eigenvalue": min_eig,
            "min_eigenvalue_refined": min_eig_hi,
            "tol": tol,
            "verdict": verdict,
        },
    )
    print(f"linear-independence check: {verdict} (min eigenvalue {min_eig:.6e}, tol {tol:g})")
    return 0


def cmd_check_penalty(args, doc) -> int:
    cfgmod.require_sections(doc, ["penalty_check"])
    pc = doc["penalty_check"]
    spec = cfgmod.build_penalty(pc.get("penalty", {"kind": "bic"}))
    report = check_H4(
        spec,
        d=pc.get("d", 1),
        k_pairs=pc.get("k_pairs", [[2, 1], [3, 1], [4, 2]]),
        n_grid=pc.get("n_grid", [10, 100, 1000, 10000]),
        gap_threshold=pc.get("gap_threshold", 10.0),
        ratio_threshold=pc.get("ratio_threshold", 0.5),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "h4_report.json", report.to_json_dict())
    if report.overall_pass:
        print(f"penalty {spec.label}: verdict pass")
    else:
        print(f"penalty {spec.label}: verdict fail ({', '.join(report.failed_conditions())})")
    return 0


_COMMANDS = {
    "gen-data": (cmd_gen_data, False),
    "fit": (cmd_fit, True),
    "select": (cmd_select, True),
    "mc-consistency": (cmd_mc_consistency, False),
    "verify-lemma": (cmd_verify_lemma, False),
    "check-ident": (cmd_check_ident, False),
    "check-penalty": (cmd_check_penalty, False),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlparch",
        description="Penalized-likelihood estimation of MLP hidden-unit counts "
        "and numerical checks of the supporting theory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, needs_data) in _COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON configuration")
        p.add_argument("--out", default=".", help="output directory for artifacts")
        p.add_argument("--seed", type=int, default=None, help="override the command's seed")
        if needs_data:
            p.add_argument("--data", required=True, help="dataset CSV (from gen-data)")
        if name == "mc-consistency":
            p.add_argument("--threads", type=int, default=1, help="worker processes")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        raw = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        doc = _parse_and_validate(raw)
        handler, _ = _COMMANDS[args.command]
        return handler(args, doc)
    except InvalidConfigError as exc:
        _report_config_error(exc, args.config, raw)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OptimizationFailure, MlparchError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"unexpected failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
