"""Run configuration: a versioned YAML document validated in one pass.

Validation never stops at the first problem; every error is collected with
the dotted path of the offending key.  Unknown keys are errors.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import yaml

from . import coefficients as co
from .fuzzy_core import AlphaGrid
from .solver import ProblemSpec, StoppingRule
from .stochastic_paths import GridError, make_grid

SCHEMA_VERSION = 1
MODES = ("solve", "sweep-initial", "sweep-coefficients", "verify-properties", "oracle-compare", "moment-study")

_COEFFS = {
    "phi": "initial",
    "g1": "kernel", "g2": "kernel", "h1": "kernel", "h2": "kernel",
    "K1": "drift", "K2": "drift",
    "L1": "diffusion", "L2": "diffusion",
}

DEFAULTS: Dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "mode": None,
    "seed": 0,
    "paths": 1,
    "problem": {
        "tau": 0.25,
        "horizon": 1.0,
        "dt": 1 / 256,
        "alpha_levels": 10,
        "rho": 0.0,
        "lipschitz_C": None,
        "phi": {"family": "triangular"},
        **{k: {"family": "zero"} for k in ("g1", "g2", "h1", "h2", "K1", "K2", "L1", "L2")},
    },
    "solver": {"tol": 1e-8, "max_iters": 50, "estimate_C": True, "backend": None},
    "output": {"dir": "results"},
    "sweep_initial": {"epsilons": [0.1, 0.01, 0.001]},
    "sweep_coefficients": {"target": "g2", "perturbation": "scale", "orders": [1, 2, 4, 8, 16],
                           "times": [0.5, 1.0], "probes": 64},
    "moment_study": {"n_max": 12},
    "verify": {"cases": 10000, "pairs": 1000},
}

_TARGETS = {"scale": ("g1", "g2", "h1", "h2"), "shift": ("K1", "K2")}


class ConfigError(ValueError):
    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    """A validated configuration.

    ``doc`` is the canonical document (defaults filled in); equality, hashing
    and serialization all go through it.
    """

    doc: Dict[str, Any]
    spec: ProblemSpec

    @property
    def mode(self) -> str:
        return self.doc["mode"]

    @property
    def seed(self) -> int:
        return int(self.doc["seed"])

    @property
    def paths(self) -> int:
        return int(self.doc["paths"])

    @property
    def stop(self) -> StoppingRule:
        return StoppingRule(float(self.doc["solver"]["tol"]), int(self.doc["solver"]["max_iters"]))

    def section(self, name: str) -> Dict[str, Any]:
        return self.doc[name]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and canonical_json(self.doc) == canonical_json(other.doc)

    def __hash__(self):
        return hash(canonical_json(self.doc))

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.doc).encode()).hexdigest()

    def with_overrides(self, **kw) -> "RunConfig":
        doc = copy.deepcopy(self.doc)
        for key, val in kw.items():
            if val is None:
                continue
            if key == "out":
                doc["output"]["dir"] = str(val)
            else:
                doc[key] = val
        return parse_document(doc)


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _merge(defaults, given, path, errors):
    if not isinstance(given, dict):
        errors.append(f"{path or 'document'}: expected a mapping, got {type(given).__name__}")
        return copy.deepcopy(defaults)
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            errors.append(f"{where}: unknown key")
            continue
        if isinstance(defaults[key], dict) and key not in _COEFFS:
            out[key] = _merge(defaults[key], val, where, errors)
        else:
            out[key] = val
    return out


def _number(doc, path, errors, *, positive=False, nonneg=False, integer=False, allow_none=False):
    node = doc
    keys = path.split(".")
    for k in keys[:-1]:
        node = node[k]
    val = node[keys[-1]]
    if val is None and allow_none:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        errors.append(f"{path}: expected a number, got {val!r}")
        return None
    if integer and int(val) != val:
        errors.append(f"{path}: expected an integer, got {val!r}")
        return None
    if not math.isfinite(val):
        errors.append(f"{path}: must be finite")
        return None
    if positive and val <= 0:
        errors.append(f"{path}: must be positive, got {val!r}")
        return None
    if nonneg and val < 0:
        errors.append(f"{path}: must be >= 0, got {val!r}")
        return None
    node[keys[-1]] = int(val) if integer else float(val)
    return node[keys[-1]]


def _coefficient_docs(obj, path, errors):
    """Coerce numbers inside a family entry to floats so the document is canonical."""
    if not isinstance(obj, dict):
        errors.append(f"{path}: expected a mapping with a 'family' key")
        return obj
    out = {}
    for k, v in obj.items():
        if isinstance(v, dict):
            out[k] = _coefficient_docs(v, f"{path}.{k}", errors) if k == "base" else \
                {kk: float(vv) if isinstance(vv, (int, float)) and not isinstance(vv, bool) else vv
                 for kk, vv in v.items()}
        elif isinstance(v, (int, float)) and not isinstance(v, bool) and k != "power":
            out[k] = float(v)
        else:
            out[k] = v
    return out


def parse_document(given: Any, mode: Optional[str] = None) -> RunConfig:
    errors: List[str] = []
    doc = _merge(DEFAULTS, given if given is not None else {}, "", errors)
    if doc["schema_version"] != SCHEMA_VERSION:
        errors.append(f"schema_version: expected {SCHEMA_VERSION}, got {doc['schema_version']!r}")
    if mode is not None:
        if doc["mode"] not in (None, mode):
            errors.append(f"mode: config says {doc['mode']!r} but the command is {mode!r}")
        doc["mode"] = mode
    if doc["mode"] not in MODES:
        errors.append(f"mode: expected one of {list(MODES)}, got {doc['mode']!r}")
    seed = _number(doc, "seed", errors, nonneg=True, integer=True)
    if seed is not None and seed >= 2 ** 64:
        errors.append("seed: must fit in 64 bits")
    _number(doc, "paths", errors, positive=True, integer=True)

    p = "problem"
    tau = _number(doc, f"{p}.tau", errors, nonneg=True)
    horizon = _number(doc, f"{p}.horizon", errors, positive=True)
    dt = _number(doc, f"{p}.dt", errors, positive=True)
    m = _number(doc, f"{p}.alpha_levels", errors, positive=True, integer=True)
    rho = _number(doc, f"{p}.rho", errors)
    if rho is not None and not -1 <= rho <= 1:
        errors.append(f"{p}.rho: correlation must lie in [-1, 1], got {rho}")
    _number(doc, f"{p}.lipschitz_C", errors, positive=True, allow_none=True)
    if None not in (tau, horizon, dt):
        for key, val in (("tau", tau), ("horizon", horizon)):
            try:
                make_grid(val if key == "tau" else 0.0, val if key == "horizon" else dt, dt)
            except GridError:
                errors.append(f"{p}.{key}={val} is not an integer multiple of {p}.dt={dt}")

    alpha = AlphaGrid.uniform(m) if m else AlphaGrid.uniform()
    built = {}
    for key, kind in _COEFFS.items():
        doc[p][key] = _coefficient_docs(doc[p][key], f"{p}.{key}", errors)
        try:
            built[key] = co.build(kind, doc[p][key], alpha)
        except (co.RegistryError, TypeError, ValueError) as exc:
            errors.append(f"{p}.{key}: {exc}")

    _number(doc, "solver.tol", errors, positive=True)
    _number(doc, "solver.max_iters", errors, positive=True, integer=True)
    if not isinstance(doc["solver"]["estimate_C"], bool):
        errors.append("solver.estimate_C: expected true or false")
    if doc["solver"]["backend"] not in (None, "numba", "numpy"):
        errors.append(f"solver.backend: expected numba, numpy or null, got {doc['solver']['backend']!r}")
    if not isinstance(doc["output"]["dir"], str) or not doc["output"]["dir"]:
        errors.append("output.dir: expected a non-empty path")

    _validate_modes(doc, errors)
    if errors:
        raise ConfigError(errors)
    spec = ProblemSpec(
        tau=tau, horizon=horizon, dt=dt, alpha=alpha, rho=rho,
        lipschitz_C=doc[p]["lipschitz_C"],
        **built,
    )
    return RunConfig(doc, spec)


def _validate_modes(doc, errors):
    eps = doc["sweep_initial"]["epsilons"]
    if not isinstance(eps, list) or not eps or not all(isinstance(e, (int, float)) and e > 0 for e in eps):
        errors.append("sweep_initial.epsilons: expected a non-empty list of positive numbers")
    else:
        doc["sweep_initial"]["epsilons"] = [float(e) for e in eps]
    sc = doc["sweep_coefficients"]
    if sc["perturbation"] not in _TARGETS:
        errors.append(f"sweep_coefficients.perturbation: expected one of {sorted(_TARGETS)}, got {sc['perturbation']!r}")
    elif sc["target"] not in _TARGETS[sc["perturbation"]]:
        errors.append(f"sweep_coefficients.target: {sc['perturbation']!r} applies to {list(_TARGETS[sc['perturbation']])}, "
                      f"got {sc['target']!r}")
    orders = sc["orders"]
    if not isinstance(orders, list) or not orders or not all(isinstance(n, int) and n > 0 for n in orders):
        errors.append("sweep_coefficients.orders: expected a non-empty list of positive integers")
    times = sc["times"]
    if not isinstance(times, list) or not times or not all(isinstance(t, (int, float)) for t in times):
        errors.append("sweep_coefficients.times: expected a non-empty list of times")
    else:
        sc["times"] = [float(t) for t in times]
    _number(doc, "sweep_coefficients.probes", errors, positive=True, integer=True)
    _number(doc, "moment_study.n_max", errors, positive=True, integer=True)
    _number(doc, "verify.cases", errors, positive=True, integer=True)
    _number(doc, "verify.pairs", errors, positive=True, integer=True)


def parse_config(text: str, mode: Optional[str] = None) -> RunConfig:
    try:
        given = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"document: not valid YAML ({exc})"]) from None
    return parse_document(given, mode)


def serialize(config: RunConfig) -> str:
    return yaml.safe_dump(config.doc, sort_keys=True, default_flow_style=False)


def load(path, mode: Optional[str] = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), mode)
