"""Run-configuration document: schema validation and object construction.

A run is configured by a single JSON document with named sections; every
default of the library is overridable there. Validation is strict: unknown
keys anywhere in the document are rejected, and nothing is executed (and
no artifact written) unless the whole document validates.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from .errors import InvalidConfigError
from .mle import OptConfig
from .model import Theta
from .selection import PenaltySpec
from .sim import InputDist
from .space import ThetaSpace
from .transfer import TransferFunction, get_transfer

_PENALTY_FIELDS = {"kind", "c", "alpha"}

_SECTION_FIELDS = {
    "model": {"beta", "a", "b", "W"},
    "transfer": None,  # plain string
    "sigma2": None,  # plain number
    "space": {"bound", "eta", "sign_convention"},
    "input_dist": {"kind", "mean", "sd", "lo", "hi"},
    "data": {"n", "seed"},
    "fit": {"k", "n_starts", "max_iters", "grad_tol", "step_tol", "base_seed"},
    "select": {"M", "penalty"},
    "experiment": {"n_grid", "replications", "M", "penalties", "base_seed",
                   "n_starts", "max_iters", "grad_tol", "step_tol"},
    "lemma": {"ambient_k", "delta_grid", "n_mc", "seed"},
    "gram": {"n_nodes", "tol", "seed"},
    "penalty_check": {"penalty", "d", "k_pairs", "n_grid", "gap_threshold", "ratio_threshold"},
}


class ConfigErrors:
    """Collects key-path messages so a bad document reports everything at once."""

    def __init__(self):
        self.messages: list[tuple[str, str]] = []

    def add(self, path: str, msg: str) -> None:
        self.messages.append((path, msg))

    def raise_if_any(self) -> None:
        if self.messages:
            raise InvalidConfigError(self.messages)


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_number_list(v: Any) -> bool:
    return isinstance(v, list) and len(v) > 0 and all(_is_number(x) for x in v)


def _check_matrix(v: Any) -> bool:
    return (
        isinstance(v, list)
        and len(v) > 0
        and all(_check_number_list(row) for row in v)
        and len({len(row) for row in v}) == 1
    )


def _validate_penalty(p: Any, path: str, errs: ConfigErrors) -> None:
    if not isinstance(p, dict):
        errs.add(path, "penalty must be an object with a 'kind' field")
        return
    for key in p:
        if key not in _PENALTY_FIELDS:
            errs.add(f"{path}.{key}", f"unknown key {key!r} in penalty spec")
    try:
        PenaltySpec(kind=p.get("kind"), c=p.get("c"), alpha=p.get("alpha"))
    except (ValueError, TypeError) as exc:
        errs.add(path, str(exc))


def validate_document(doc: Any) -> None:
    """Schema-check the whole document; raises InvalidConfigError listing
    every offending key path."""
    errs = ConfigErrors()
    if not isinstance(doc, dict):
        errs.add("", "the configuration document must be a JSON object")
        errs.raise_if_any()

    for section in doc:
        if section not in _SECTION_FIELDS:
            errs.add(section, f"unknown section {section!r}")
            continue
        allowed = _SECTION_FIELDS[section]
        if allowed is None:
            continue
        body = doc[section]
        if not isinstance(body, dict):
            errs.add(section, f"section {section!r} must be an object")
            continue
        for key in body:
            if key not in allowed:
                errs.add(f"{section}.{key}", f"unknown key {key!r} in section {section!r}")

    if "transfer" in doc:
        try:
            if isinstance(doc["transfer"], str):
                get_transfer(doc["transfer"])
            else:
                errs.add("transfer", "transfer must be a string")
        except ValueError as exc:
            errs.add("transfer", str(exc))
    if "sigma2" in doc and not (_is_number(doc["sigma2"]) and doc["sigma2"] > 0):
        errs.add("sigma2", "sigma2 must be a positive number")

    if "model" in doc and isinstance(doc["model"], dict):
        mdl = doc["model"]
        for req in ("beta", "a", "b", "W"):
            if req not in mdl:
                errs.add(f"model.{req}", f"model requires {req!r}")
        if "beta" in mdl and not _is_number(mdl["beta"]):
            errs.add("model.beta", "beta must be a number")
        for key in ("a", "b"):
            if key in mdl and not _check_number_list(mdl[key]):
                errs.add(f"model.{key}", f"{key} must be a nonempty array of numbers")
        if "W" in mdl and not _check_matrix(mdl["W"]):
            errs.add("model.W", "W must be a nonempty rectangular matrix of numbers")

    if "space" in doc and isinstance(doc["space"], dict):
        sp = doc["space"]
        for key in ("bound", "eta"):
            if key in sp and not (_is_number(sp[key]) and sp[key] > 0):
                errs.add(f"space.{key}", f"{key} must be a positive number")
        if "sign_convention" in sp and not isinstance(sp["sign_convention"], bool):
            errs.add("space.sign_convention", "sign_convention must be a boolean")

    if "input_dist" in doc and isinstance(doc["input_dist"], dict):
        dist = doc["input_dist"]
        kind = dist.get("kind")
        if kind not in ("gaussian", "uniform"):
            errs.add("input_dist.kind", "kind must be 'gaussian' or 'uniform'")
        elif kind == "gaussian":
            for key in ("mean", "sd"):
                if not _check_number_list(dist.get(key)):
                    errs.add(f"input_dist.{key}", f"gaussian inputs require array {key!r}")
        else:
            for key in ("lo", "hi"):
                if not _check_number_list(dist.get(key)):
                    errs.add(f"input_dist.{key}", f"uniform inputs require array {key!r}")

    _validate_int_fields(doc, "data", {"n": 1, "seed": None}, errs)
    _validate_opt_fields(doc, "fit", errs, extra_int={"k": 1})
    if "select" in doc and isinstance(doc["select"], dict):
        sel = doc["select"]
        if "M" in sel and not (_is_int(sel["M"]) and sel["M"] >= 1):
            errs.add("select.M", "M must be an integer >= 1")
        if "penalty" in sel:
            _validate_penalty(sel["penalty"], "select.penalty", errs)

    if "experiment" in doc and isinstance(doc["experiment"], dict):
        exp = doc["experiment"]
        if "n_grid" in exp and not (
            isinstance(exp["n_grid"], list)
            and all(_is_int(n) and n >= 1 for n in exp["n_grid"])
        ):
            errs.add("experiment.n_grid", "n_grid must be an array of integers")
        for key, lo in (("replications", 1), ("M", 1), ("n_starts", 1), ("max_iters", 1)):
            if key in exp and not (_is_int(exp[key]) and exp[key] >= lo):
                errs.add(f"experiment.{key}", f"{key} must be an integer >= {lo}")
        for key in ("grad_tol", "step_tol"):
            if key in exp and not (_is_number(exp[key]) and exp[key] > 0):
                errs.add(f"experiment.{key}", f"{key} must be a positive number")
        if "base_seed" in exp and not _is_int(exp["base_seed"]):
            errs.add("experiment.base_seed", "base_seed must be an integer")
        if "penalties" in exp:
            if not isinstance(exp["penalties"], list) or not exp["penalties"]:
                errs.add("experiment.penalties", "penalties must be a nonempty array")
            else:
                for i, p in enumerate(exp["penalties"]):
                    _validate_penalty(p, f"experiment.penalties[{i}]", errs)

    if "lemma" in doc and isinstance(doc["lemma"], dict):
        lem = doc["lemma"]
        for key, lo in (("ambient_k", 1), ("n_mc", 1)):
            if key in lem and not (_is_int(lem[key]) and lem[key] >= lo):
                errs.add(f"lemma.{key}", f"{key} must be an integer >= {lo}")
        if "seed" in lem and not _is_int(lem["seed"]):
            errs.add("lemma.seed", "seed must be an integer")
        if "delta_grid" in lem and not (
            _check_number_list(lem["delta_grid"])
            and all(b < a for a, b in zip(lem["delta_grid"], lem["delta_grid"][1:]))
            and len(lem["delta_grid"]) >= 3
        ):
            errs.add("lemma.delta_grid", "delta_grid must be >= 3 strictly decreasing numbers")

    if "gram" in doc and isinstance(doc["gram"], dict):
        gr = doc["gram"]
        if "n_nodes" in gr and not (_is_int(gr["n_nodes"]) and gr["n_nodes"] >= 2):
            errs.add("gram.n_nodes", "n_nodes must be an integer >= 2")
        if "tol" in gr and not (_is_number(gr["tol"]) and gr["tol"] > 0):
            errs.add("gram.tol", "tol must be a positive number")
        if "seed" in gr and not _is_int(gr["seed"]):
            errs.add("gram.seed", "seed must be an integer")

    if "penalty_check" in doc and isinstance(doc["penalty_check"], dict):
        pc = doc["penalty_check"]
        if "penalty" in pc:
            _validate_penalty(pc["penalty"], "penalty_check.penalty", errs)
        if "d" in pc and not (_is_int(pc["d"]) and pc["d"] >= 1):
            errs.add("penalty_check.d", "d must be an integer >= 1")
        if "k_pairs" in pc and not (
            isinstance(pc["k_pairs"], list)
            and pc["k_pairs"]
            and all(
                isinstance(p, list) and len(p) == 2 and all(_is_int(v) for v in p)
                for p in pc["k_pairs"]
            )
        ):
            errs.add("penalty_check.k_pairs", "k_pairs must be an array of [k1, k2] integer pairs")
        if "n_grid" in pc and not (
            isinstance(pc["n_grid"], list) and all(_is_int(n) and n >= 1 for n in pc["n_grid"])
        ):
            errs.add("penalty_check.n_grid", "n_grid must be an array of integers")
        for key in ("gap_threshold", "ratio_threshold"):
            if key in pc and not (_is_number(pc[key]) and pc[key] > 0):
                errs.add(f"penalty_check.{key}", f"{key} must be a positive number")

    errs.raise_if_any()


def _validate_int_fields(doc, section, fields, errs):
    if section not in doc or not isinstance(doc[section], dict):
        return
    body = doc[section]
    for key, lo in fields.items():
        if key in body:
            ok = _is_int(body[key]) and (lo is None or body[key] >= lo)
            if not ok:
                bound = f" >= {lo}" if lo is not None else ""
                errs.add(f"{section}.{key}", f"{key} must be an integer{bound}")


def _validate_opt_fields(doc, section, errs, extra_int=None):
    if section not in doc or not isinstance(doc[section], dict):
        return
    body = doc[section]
    ints = {"n_starts": 1, "max_iters": 1, "base_seed": None}
    ints.update(extra_int or {})
    _validate_int_fields(doc, section, ints, errs)
    for key in ("grad_tol", "step_tol"):
        if key in body and not (_is_number(body[key]) and body[key] > 0):
            errs.add(f"{section}.{key}", f"{key} must be a positive number")


def require_sections(doc: dict, sections) -> None:
    missing = [s for s in sections if s not in doc]
    if missing:
        raise InvalidConfigError([(s, f"required section {s!r} is missing") for s in missing])


# ---------------------------------------------------------------------------
# Builders: validated document -> library objects
# ---------------------------------------------------------------------------

def build_theta(doc: dict) -> Theta:
    mdl = doc["model"]
    return Theta(
        beta=mdl["beta"],
        a=np.asarray(mdl["a"], dtype=np.float64),
        b=np.asarray(mdl["b"], dtype=np.float64),
        W=np.asarray(mdl["W"], dtype=np.float64),
    )


def build_transfer(doc: dict) -> TransferFunction:
    return get_transfer(doc.get("transfer", "tanh"))


def build_space(doc: dict, k: int, d: int) -> ThetaSpace:
    sp = doc.get("space", {})
    return ThetaSpace(
        k=k,
        d=d,
        bound=sp.get("bound", 10.0),
        eta=sp.get("eta", 0.1),
        sign_convention=sp.get("sign_convention", True),
    )


def build_input_dist(doc: dict) -> InputDist:
    dist = doc["input_dist"]
    if dist["kind"] == "gaussian":
        return InputDist.gaussian(dist["mean"], dist["sd"])
    return InputDist.uniform(dist["lo"], dist["hi"])


def build_opt(body: dict, seed_override=None) -> OptConfig:
    base_seed = body.get("base_seed", 0) if seed_override is None else seed_override
    return OptConfig(
        n_starts=body.get("n_starts", 20),
        max_iters=body.get("max_iters", 500),
        grad_tol=body.get("grad_tol", 1e-6),
        step_tol=body.get("step_tol", 1e-12),
        base_seed=base_seed,
    )


def build_penalty(p: dict) -> PenaltySpec:
    return PenaltySpec(kind=p.get("kind"), c=p.get("c"), alpha=p.get("alpha"))


def key_line(raw_text: str, path: str) -> int | None:
    """Best-effort line number of a key path inside the raw JSON text."""
    for part in reversed([p for p in path.replace("]", "").replace("[", ".").split(".") if p]):
        if part.isdigit():
            continue
        needle = f'"{part}"'
        for lineno, line in enumerate(raw_text.splitlines(), start=1):
            if needle in line:
                return lineno
        break
    return None
