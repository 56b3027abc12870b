"""Command line entry point.

Exit codes:

    0  success
    2  invalid configuration or arguments
    3  a Hukuhara difference failed to exist (some iterate is undefined)
    4  Picard iteration did not reach the tolerance within max_iters
    5  a theoretical bound was violated (only with --strict-bounds)
    6  input/output failure
    7  a property or oracle verification failed
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import os
import sys
from dataclasses import replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from . import coefficients as co
from . import experiments as ex
from . import properties as props
from .config import MODES, ConfigError, RunConfig, load
from .solver import (
    ConfigurationError,
    bound_constants,
    check_cz_bound,
    moment_envelope,
    solve_ensemble,
    solve_path,
)
from .stochastic_paths import SeedSpec, sample_brownian_pair

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HUKUHARA = 3
EXIT_NONCONVERGENCE = 4
EXIT_BOUND = 5
EXIT_IO = 6
EXIT_VERIFY = 7

log = logging.getLogger("fuzzyvolterra")


class Outcome:
    """Everything a mode produces: payload, tables and an exit status."""

    def __init__(self):
        self.payload: Dict[str, Any] = {}
        self.tables: Dict[str, List[List[Any]]] = {}
        self.summary: List[str] = []
        self.status = EXIT_OK

    def table(self, name: str, header: Sequence[str], rows):
        self.tables[name] = [list(header)] + [list(r) for r in rows]

    def fail(self, code: int):
        # the most severe (lowest nonzero) code wins
        if self.status == EXIT_OK or code < self.status:
            self.status = code


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _constant_or_exit(cfg: RunConfig):
    spec = cfg.spec
    if spec.lipschitz_C is None and not cfg.doc["solver"]["estimate_C"]:
        raise ConfigurationError("problem.lipschitz_C is null and solver.estimate_C is false")
    return bound_constants(spec)


# ---------------------------------------------------------------------------
# modes


def run_solve(cfg: RunConfig, keep_iterates: bool, strict: bool) -> Outcome:
    out = Outcome()
    spec, backend = cfg.spec, cfg.doc["solver"]["backend"]
    rep = solve_ensemble(spec, cfg.paths, cfg.seed, stop=cfg.stop, backend=backend)
    bc = _constant_or_exit(cfg)
    succ = np.sqrt(rep.sq_sup_diff)
    first = [float(x) for x in succ[0]] if succ.shape[0] else []
    checks = check_cz_bound(rep, bc, min_paths=1) if rep.n_paths else []
    out.table("iterations.csv",
              ["n", "sup_diff_path0", "mean_sq_sup_diff", "se", "cz_bound", "within_bound"],
              [[c.n, first[c.n - 1], c.estimate, c.se, c.bound, int(c.passed)] for c in checks])
    alpha = spec.alpha.array()
    times = rep.grid.times()
    sol = rep.solutions[:, 0]
    out.table("solution.csv", ["node", "t", "alpha", "lo", "hi"],
              [[k, times[k], alpha[l], sol[k, l, 0], sol[k, l, 1]]
               for k in range(sol.shape[0]) for l in range(sol.shape[1])])
    out.table("failures.csv", ["path", "iteration", "node", "t", "level", "deficit", "kind"],
              [[f.path, f.iteration, f.node, f.time, f.level, f.deficit, f.kind] for f in rep.failures])
    out.payload = {
        "paths": cfg.paths,
        "surviving_paths": rep.n_paths,
        "n_iters": rep.n_iters,
        "converged": rep.converged,
        "succ_diff_path0": first,
        "path_iters": rep.path_iters.tolist(),
        "bound": {"xi": bc.xi, "zeta": bc.zeta, "C": bc.C,
                  "registry_C": co.problem_constant(spec.K1, spec.K2, spec.L1, spec.L2)},
        "cz_check": [{"n": c.n, "estimate": c.estimate, "se": c.se, "bound": c.bound, "passed": c.passed}
                     for c in checks],
        "hukuhara_failures": [vars(f) for f in rep.failures],
    }
    if keep_iterates:
        path = solve_path(spec, sample_brownian_pair(rep.grid, spec.rho, SeedSpec(cfg.seed, 0)),
                          cfg.stop, keep_iterates=True, backend=backend, with_bound=False)
        out.table("iterates.csv", ["iteration", "node", "t", "alpha", "lo", "hi"],
                  [[n, k, times[k], alpha[l], it.values[k, l, 0], it.values[k, l, 1]]
                   for n, it in enumerate(path.iterates_kept)
                   for k in range(it.values.shape[0]) for l in range(it.values.shape[1])])
    out.summary.append(f"succ_diff={first}")
    out.summary.append(f"paths={cfg.paths} ok={rep.n_paths} iterations={rep.n_iters} converged={rep.converged}")
    out.summary.append(f"xi={bc.xi!r} zeta={bc.zeta!r} C={bc.C!r}")
    for f in rep.failures:
        msg = (f"Hukuhara difference missing: path {f.path}, iteration {f.iteration}, node {f.node} "
               f"(t={f.time!r}), level {f.level}, {f.kind} deficit {f.deficit!r}")
        log.error(msg)
        out.summary.append(msg)
    if rep.failures:
        out.fail(EXIT_HUKUHARA)
    elif not rep.converged:
        out.fail(EXIT_NONCONVERGENCE)
    if strict and not all(c.passed for c in checks):
        out.fail(EXIT_BOUND)
    return out


def _dependence_tables(out: Outcome, rep: ex.DependenceReport, times):
    header = ["label", "input_distance", "output_mean", "output_se", "ratio", "ratio_se", "main_mean", "main_se",
              "pre_segment"]
    for t in times:
        header += [f"mean_t={t!r}", f"se_t={t!r}"]
    rows = []
    for r in rep.rows:
        row = [r.label, r.input_distance, r.output_mean, r.output_se, r.ratio, r.ratio_se,
               r.main_mean, r.main_se, r.pre_segment]
        for t in times:
            m, s = r.per_time.get(float(t), (math.nan, math.nan))
            row += [m, s]
        rows.append(row)
    out.table("dependence.csv", header, rows)
    out.payload = {"kind": rep.kind, "bound": rep.bound, "gamma": rep.gamma, "note": rep.note,
                   "rows": [dict(vars(r), ratio=r.ratio, ratio_se=r.ratio_se,
                                 per_time={repr(k): v for k, v in r.per_time.items()}) for r in rep.rows],
                   "bound_holds": rep.bound_holds()}
    for r in rep.rows:
        out.summary.append(f"{r.label}: input={r.input_distance!r} output={r.output_mean!r} +- {r.output_se!r}")
        if r.failures:
            out.fail(EXIT_HUKUHARA)


def run_sweep_initial(cfg: RunConfig, strict: bool) -> Outcome:
    out = Outcome()
    spec = cfg.spec
    _constant_or_exit(cfg)
    variants = [(f"eps={e!r}", replace(spec, phi=co.ShiftedInitial(base=spec.phi, shift=e)))
                for e in cfg.section("sweep_initial")["epsilons"]]
    sweep = ex.PerturbationSweep(spec, variants, paths=cfg.paths, seed=cfg.seed, stop=cfg.stop)
    rep = ex.initial_value_sweep(sweep, backend=cfg.doc["solver"]["backend"])
    _dependence_tables(out, rep, sweep.times)
    out.summary.append(f"ratio cap 5 exp(2 gamma T) = {rep.bound!r}")
    if strict and not all(rep.bound_holds()):
        out.fail(EXIT_BOUND)
    return out


def run_sweep_coefficients(cfg: RunConfig) -> Outcome:
    out = Outcome()
    spec = cfg.spec
    sc = cfg.section("sweep_coefficients")
    target = sc["target"]
    variants = []
    for n in sc["orders"]:
        base = getattr(spec, target)
        if sc["perturbation"] == "scale":
            new = co.ScaledKernel(base=base, factor=1.0 + 1.0 / n)
        else:
            new = co.ScaledShiftDrift(base=base, factor=1.0, shift=1.0 / n)
        variants.append((f"n={n}", replace(spec, **{target: new})))
    sweep = ex.PerturbationSweep(spec, variants, paths=cfg.paths, seed=cfg.seed, stop=cfg.stop,
                                 times=tuple(sc["times"]), probes=sc["probes"])
    rep = ex.coefficient_sweep(sweep, backend=cfg.doc["solver"]["backend"])
    _dependence_tables(out, rep, sweep.times)
    return out


def run_verify(cfg: RunConfig) -> Outcome:
    out = Outcome()
    v = cfg.section("verify")
    res = props.algebra_suite(n=v["cases"], levels=cfg.spec.alpha.size, seed=cfg.seed)
    res.append(props.hausdorff_oracle_check(pairs=v["pairs"], seed=cfg.seed))
    for crisp in (False, True):
        res.extend(props.integral_inequalities(paths=v["pairs"], seed=cfg.seed, crisp=crisp,
                                               levels=cfg.spec.alpha.size).values())
    out.table("properties.csv", ["property", "cases", "violations", "max_error"],
              [[r.name, r.cases, r.violations, r.max_error] for r in res])
    out.payload = {"properties": [dict(vars(r), ok=r.ok) for r in res]}
    for r in res:
        out.summary.append(f"{r.name:<22} {'ok' if r.ok else 'FAIL'}  cases={r.cases} max_error={r.max_error!r}")
    if not all(r.ok for r in res):
        out.fail(EXIT_VERIFY)
    return out


def run_oracle(cfg: RunConfig) -> Outcome:
    out = Outcome()
    stop = cfg.stop if cfg.stop.tol <= 1e-12 else type(cfg.stop)(1e-13, max(cfg.stop.max_iters, 200))
    try:
        r = ex.crisp_oracle_compare(cfg.spec, cfg.paths, cfg.seed, stop=stop, backend=cfg.doc["solver"]["backend"])
    except ex.NotCrisp as exc:
        raise ConfigurationError(str(exc)) from None
    out.table("oracle.csv", ["statistic", "solver", "oracle"], [
        ["terminal_mean", *r.terminal_mean],
        ["terminal_second_moment", *r.terminal_second_moment],
        ["max_abs_diff", r.max_abs_diff, 0.0],
    ])
    out.payload = _clean(dict(vars(r), moment_gap=r.moment_gap))
    out.summary.append(f"max |solver - oracle| = {r.max_abs_diff!r} over {r.n_paths} paths")
    if r.max_abs_diff > 1e-10:
        out.fail(EXIT_VERIFY)
    return out


def run_moment(cfg: RunConfig, strict: bool) -> Outcome:
    out = Outcome()
    _constant_or_exit(cfg)
    tab = ex.moment_bound_study(cfg.spec, cfg.section("moment_study")["n_max"], cfg.paths, cfg.seed,
                                backend=cfg.doc["solver"]["backend"])
    env = moment_envelope(cfg.spec)
    out.table("moments.csv", ["n", "sup_moment", "se", "envelope", "below"],
              [[r.n, r.sup_moment, r.se, r.envelope, int(r.below)] for r in tab.rows])
    out.payload = {"envelope": tab.envelope, "M3": env.M3, "M4": env.M4, "M5": env.M5,
                   "capped": tab.capped, "plateau": tab.plateau(), "stop_iter": tab.stop_iter,
                   "rows": [vars(r) for r in tab.rows]}
    out.summary.append(f"envelope={tab.envelope!r} max estimate={max(r.sup_moment for r in tab.rows)!r}")
    if strict and not tab.capped:
        out.fail(EXIT_BOUND)
    return out


# ---------------------------------------------------------------------------
# driver


def write_outputs(outdir: str, cfg: RunConfig, outcome: Outcome, timestamp: str):
    os.makedirs(outdir, exist_ok=True)
    record = {
        "meta": {"config_hash": cfg.digest(), "seed": cfg.seed, "mode": cfg.mode,
                 "timestamp": timestamp, "version": __version__, "exit_status": outcome.status},
        "config": cfg.doc,
        "payload": _clean(outcome.payload),
    }
    with open(os.path.join(outdir, "results.json"), "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    for name, rows in outcome.tables.items():
        with open(os.path.join(outdir, name), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in rows:
                w.writerow([_cell(c) for c in row])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fuzzyvolterra", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        sp = sub.add_parser(mode)
        sp.add_argument("--config", required=True, help="YAML run configuration")
        sp.add_argument("--seed", type=int, help="overrides the config seed")
        sp.add_argument("--paths", type=int, help="overrides the number of Monte Carlo paths")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--keep-iterates", action="store_true", help="write every Picard iterate of path 0")
        sp.add_argument("--strict-bounds", action="store_true", help="exit with status 5 on any bound violation")
    return p


def _setup_logging(outdir: str) -> logging.Handler:
    os.makedirs(outdir, exist_ok=True)
    handler = logging.FileHandler(os.path.join(outdir, "diagnostics.log"), mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    return handler


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config, mode=args.mode)
        cfg = cfg.with_overrides(seed=args.seed, paths=args.paths, out=args.out)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config {args.config}: {exc}", file=sys.stderr)
        return EXIT_IO
    outdir = cfg.doc["output"]["dir"]
    try:
        handler = _setup_logging(outdir)
    except OSError as exc:
        print(f"cannot create output directory {outdir}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        log.info("mode=%s seed=%d paths=%d config_hash=%s", cfg.mode, cfg.seed, cfg.paths, cfg.digest())
        runners = {
            "solve": lambda: run_solve(cfg, args.keep_iterates, args.strict_bounds),
            "sweep-initial": lambda: run_sweep_initial(cfg, args.strict_bounds),
            "sweep-coefficients": lambda: run_sweep_coefficients(cfg),
            "verify-properties": lambda: run_verify(cfg),
            "oracle-compare": lambda: run_oracle(cfg),
            "moment-study": lambda: run_moment(cfg, args.strict_bounds),
        }
        try:
            outcome = runners[cfg.mode]()
        except ConfigurationError as exc:
            log.error("configuration: %s", exc)
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        try:
            write_outputs(outdir, cfg, outcome, timestamp)
        except OSError as exc:
            print(f"cannot write results to {outdir}: {exc}", file=sys.stderr)
            return EXIT_IO
        log.info("exit status %d", outcome.status)
        for line in outcome.summary:
            print(line)
        print(f"results written to {outdir} (exit {outcome.status})")
        return outcome.status
    finally:
        log.removeHandler(handler)
        handler.close()


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
