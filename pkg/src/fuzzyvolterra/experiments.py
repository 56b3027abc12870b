"""Monte Carlo studies of how solutions react to changed data.

Every comparison runs the base problem and its variants on the same Brownian
pairs (same seed, same stream per path), so the reported distances measure
the effect of the change and not sampling noise between independent runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import fuzzy_core as fc
from .solver import (
    PathEnsembleReport,
    ProblemSpec,
    StoppingRule,
    initial_value_gamma,
    mean_se,
    moment_envelope,
    solve_ensemble,
)
from .stochastic_paths import sample_increments

SWEEP_STOP = StoppingRule(tol=1e-11, max_iters=60)


class InvalidSweep(ValueError):
    pass


@dataclass(frozen=True)
class PerturbationSweep:
    base: ProblemSpec
    variants: Sequence[Tuple[str, ProblemSpec]]
    paths: int = 500
    seed: int = 0
    stop: StoppingRule = SWEEP_STOP
    times: Tuple[float, ...] = (0.5, 1.0)
    probes: int = 64


@dataclass(frozen=True)
class VariantResult:
    label: str
    input_distance: float
    output_mean: float
    output_se: float
    pre_segment: float = 0.0
    main_mean: float = 0.0
    main_se: float = 0.0
    per_time: Dict[float, Tuple[float, float]] = field(default_factory=dict)
    n_paths: int = 0
    failures: int = 0

    @property
    def ratio(self) -> float:
        return self.output_mean / self.input_distance if self.input_distance > 0 else math.nan

    @property
    def ratio_se(self) -> float:
        return self.output_se / self.input_distance if self.input_distance > 0 else math.nan


@dataclass
class DependenceReport:
    kind: str  # "initial" | "coefficient"
    rows: List[VariantResult]
    bound: Optional[float] = None  # ratio cap for initial-value sweeps
    gamma: Optional[float] = None
    note: str = ""

    def bound_holds(self) -> List[bool]:
        if self.bound is None:
            return [True] * len(self.rows)
        return [
            r.input_distance == 0 or r.ratio <= self.bound + 3 * r.ratio_se
            for r in self.rows
        ]


def _same(a, b) -> bool:
    return a is b or a == b


def _check_shared(base: ProblemSpec, variant: ProblemSpec, label: str, free: Sequence[str]):
    for f in fields(ProblemSpec):
        if f.name in free or f.name == "lipschitz_C":
            continue
        if not _same(getattr(base, f.name), getattr(variant, f.name)):
            raise InvalidSweep(f"variant {label!r} changes {f.name}, which this sweep keeps fixed")


def _solve(spec: ProblemSpec, sweep: PerturbationSweep, backend=None) -> PathEnsembleReport:
    rep = solve_ensemble(spec, sweep.paths, sweep.seed, stop=sweep.stop, backend=backend)
    return rep


def _paired(base: PathEnsembleReport, other: PathEnsembleReport):
    ok = base.ok & other.ok
    d = fc.dinf_cuts(base.solutions[:, ok], other.solutions[:, ok]) ** 2  # (nodes, paths)
    return d, int((~ok).sum())


def initial_value_sweep(sweep: PerturbationSweep, backend: Optional[str] = None) -> DependenceReport:
    """Distance between solutions whose initial maps differ.

    For each variant the input is ``sup_t d**2(Phi(t), Psi(t))`` over
    ``[-tau, T]`` and the output ``E sup_t d**2(U(t), V(t))`` over the same
    range; both segments are also reported separately.
    """
    for label, v in sweep.variants:
        _check_shared(sweep.base, v, label, free=("phi",))
    gamma = initial_value_gamma(sweep.base)
    cap = 5 * math.exp(2 * gamma * sweep.base.horizon)
    base = _solve(sweep.base, sweep, backend)
    n_pre = base.grid.n_pre
    rows = []
    for label, v in sweep.variants:
        other = _solve(v, sweep, backend)
        phi_a = sweep.base.initial_path().values
        phi_b = v.initial_path().values
        inp = float(np.max(fc.dinf_cuts(phi_a, phi_b)) ** 2)
        d, lost = _paired(base, other)
        m, se = mean_se(d.max(axis=0))
        mm, mse = mean_se(d[n_pre:].max(axis=0))
        pre = float(d[:n_pre + 1].max()) if d.size else 0.0
        rows.append(VariantResult(label, inp, float(m), float(se), pre, float(mm), float(mse),
                                  _per_time(d, base, sweep.times), d.shape[1], lost))
    return DependenceReport("initial", rows, bound=cap, gamma=gamma)


def _per_time(d: np.ndarray, rep: PathEnsembleReport, times) -> Dict[float, Tuple[float, float]]:
    out = {}
    for t in times:
        k = rep.grid.node_of(t)
        m, se = mean_se(d[k])
        out[float(t)] = (float(m), float(se))
    return out


def mismatch_aggregate(base: ProblemSpec, variant: ProblemSpec, probes: np.ndarray) -> float:
    """Kernel and coefficient mismatch between two problems, on probe pairs.

    ``probes`` holds argument pairs ``(u, v)`` with shape ``(P, 2, L, 2)``.
    For every main node ``t`` the mismatch
    ``sum_i int_0^T d**2(g_i^n K_i^n(u, v), g_i K_i(u, v)) ds`` plus the
    squared diffusion mismatches is summed by left-point quadrature over the
    s-grid; the result is the maximum over ``t`` and over probes.
    """
    g = base.grid
    t = g.main_times()
    s = t[:-1]
    tt, ss = np.meshgrid(t, s, indexing="ij")
    u, v = probes[:, 0], probes[:, 1]
    total = np.zeros((t.size, probes.shape[0]))
    for gk, kk in (("g1", "K1"), ("g2", "K2")):
        a = getattr(base, gk)(tt, ss)
        b = getattr(variant, gk)(tt, ss)
        ka = getattr(base, kk).apply(u, v)   # (P, L, 2)
        kb = getattr(variant, kk).apply(u, v)
        ya = fc.scale_cuts(a[:, :, None], ka[None, None])
        yb = fc.scale_cuts(b[:, :, None], kb[None, None])
        total += (fc.dinf_cuts(ya, yb) ** 2).sum(axis=1) * g.dt
    for hk, lk in (("h1", "L1"), ("h2", "L2")):
        a = getattr(base, hk)(tt, ss)
        b = getattr(variant, hk)(tt, ss)
        la = getattr(base, lk).apply(u, v)
        lb = getattr(variant, lk).apply(u, v)
        total += ((a[:, :, None] * la - b[:, :, None] * lb) ** 2).sum(axis=1) * g.dt
    return float(total.max())


def probe_pairs(rep: PathEnsembleReport, count: int, seed: int = 0) -> np.ndarray:
    """``(U(s), U(s - tau))`` pairs picked from a base ensemble's solutions."""
    rng = np.random.default_rng(seed)
    g = rep.grid
    ok = np.nonzero(rep.ok)[0]
    nodes = rng.integers(g.n_pre, g.n_nodes, size=count)
    paths = ok[rng.integers(0, ok.size, size=count)]
    cur = rep.solutions[nodes, paths]
    delayed = rep.solutions[nodes - g.n_pre, paths]
    return np.stack([cur, delayed], axis=1)


def _kernel_norms(spec: ProblemSpec) -> float:
    return sum(getattr(spec, k).sup_norm(spec.horizon) for k in ("g1", "g2", "h1", "h2"))


def coefficient_sweep(sweep: PerturbationSweep, backend: Optional[str] = None) -> DependenceReport:
    """Distance between solutions whose kernels or coefficients differ.

    The input column is the probe-based mismatch aggregate, the output columns
    hold ``E d**2(U(t), V(t))`` at each of ``sweep.times``; ``output_mean`` is
    the value at the last of them.
    """
    for label, v in sweep.variants:
        _check_shared(sweep.base, v, label, free=("g1", "g2", "h1", "h2", "K1", "K2", "L1", "L2"))
        if not math.isfinite(_kernel_norms(v)):
            raise InvalidSweep(f"variant {label!r} has an unbounded kernel")
    base = _solve(sweep.base, sweep, backend)
    probes = probe_pairs(base, sweep.probes, sweep.seed)
    rows = []
    for label, v in sweep.variants:
        other = _solve(v, sweep, backend)
        d, lost = _paired(base, other)
        per_t = _per_time(d, base, sweep.times)
        last = per_t[float(sweep.times[-1])]
        rows.append(VariantResult(label, mismatch_aggregate(sweep.base, v, probes), last[0], last[1],
                                  0.0, last[0], last[1], per_t, d.shape[1], lost))
    return DependenceReport("coefficient", rows,
                            note=f"mismatch aggregate over {sweep.probes} probe pairs from the base solution")


# ---------------------------------------------------------------------------
# crisp reduction


class NotCrisp(ValueError):
    pass


@dataclass(frozen=True)
class OracleComparison:
    max_abs_diff: float
    terminal_mean: Tuple[float, float]      # (solver, oracle)
    terminal_second_moment: Tuple[float, float]
    n_paths: int
    n_iters: int

    @property
    def moment_gap(self) -> float:
        return abs(self.terminal_second_moment[0] - self.terminal_second_moment[1])


def _crisp_values(spec: ProblemSpec, x: np.ndarray, y: np.ndarray, coef) -> np.ndarray:
    L = spec.alpha.size
    u = np.repeat(np.stack([x, x], axis=-1)[..., None, :], L, axis=-2)
    w = np.repeat(np.stack([y, y], axis=-1)[..., None, :], L, axis=-2)
    return coef.apply(u, w)


def scalar_oracle(spec: ProblemSpec, db2: np.ndarray) -> np.ndarray:
    """Forward recursion for the crisp one-sided equation on given increments.

    ``x_j = phi(t_j) + sum_{k<j} g2(t_j, s_k) k2(x_k, x_{k-lag}) dt
    + sum_{k<j} h2(t_j, s_k) l2(x_k, x_{k-lag}) dB_k``, evaluated node by node.
    Returns ``(n_nodes, P)``.
    """
    g = spec.grid
    P = db2.shape[1]
    phi = np.array([spec.phi(float(t)).cuts[-1, 0] for t in g.times()])
    x = np.empty((g.n_nodes, P))
    x[:g.n_pre + 1] = phi[:g.n_pre + 1, None]
    tm = g.main_times()
    drift = np.empty((g.n_main, P))
    diff = np.empty((g.n_main, P))
    for j in range(g.n_main):
        k = g.n_pre + j
        out = _crisp_values(spec, x[k], x[k - g.n_pre], spec.K2)
        drift[j] = out[..., -1, 0]
        diff[j] = _crisp_values(spec, x[k], x[k - g.n_pre], spec.L2)
        t = tm[j + 1]
        s = tm[:j + 1]
        gw = np.asarray(spec.g2(t, s), dtype=float) * g.dt
        hw = np.asarray(spec.h2(t, s), dtype=float)
        acc = phi[k + 1] + np.zeros(P)
        for i in range(j + 1):
            acc = acc + gw[i] * drift[i] + hw[i] * diff[i] * db2[i]
        x[k + 1] = acc
    return x


def crisp_oracle_compare(spec: ProblemSpec, paths: int, seed: int,
                         stop: StoppingRule = StoppingRule(tol=1e-13, max_iters=200),
                         backend: Optional[str] = None) -> OracleComparison:
    """Solve a crisp one-sided problem twice: Picard solver and forward recursion."""
    if spec.g1.sup_norm(spec.horizon) != 0.0 or spec.h1.sup_norm(spec.horizon) != 0.0:
        raise NotCrisp("oracle comparison needs g1 = 0 and h1 = 0")
    phi = spec.initial_path()
    if not phi.is_crisp():
        raise NotCrisp("initial map is not crisp")
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(32,))
    probe = _crisp_values(spec, z, z[::-1], spec.K2)
    if np.any(probe[..., 1] != probe[..., 0]) or np.any(probe != probe[..., -1:, :1]):
        raise NotCrisp("drift K2 maps crisp arguments to non-crisp values")
    rep = solve_ensemble(spec, paths, seed, stop=stop, backend=backend)
    if not rep.ok.all():
        raise NotCrisp("Hukuhara failure in a problem that should be crisp")
    _, db2 = sample_increments(rep.grid, spec.rho, seed, rep.streams)
    x = scalar_oracle(spec, db2)
    u = rep.solutions
    diff = max(float(np.max(np.abs(u[..., 0] - x[:, :, None]))), float(np.max(np.abs(u[..., 1] - x[:, :, None]))))
    uT, xT = u[-1, :, -1, 0], x[-1]
    return OracleComparison(
        max_abs_diff=diff,
        terminal_mean=(float(uT.mean()), float(xT.mean())),
        terminal_second_moment=(float((uT ** 2).mean()), float((xT ** 2).mean())),
        n_paths=paths,
        n_iters=rep.n_iters,
    )


# ---------------------------------------------------------------------------
# uniform moment bound


@dataclass(frozen=True)
class MomentRow:
    n: int
    sup_moment: float
    se: float
    envelope: float

    @property
    def below(self) -> bool:
        return self.sup_moment <= self.envelope


@dataclass
class MomentTable:
    rows: List[MomentRow]
    envelope: float
    stop_iter: int

    @property
    def capped(self) -> bool:
        return all(r.below for r in self.rows)

    def plateau(self, rtol: float = 1e-6) -> bool:
        """Estimates stop moving once the fixed point is reached."""
        tail = [r.sup_moment for r in self.rows if r.n >= self.stop_iter]
        return len(tail) < 2 or max(tail) - min(tail) <= rtol * max(1.0, max(tail))


def moment_bound_study(spec: ProblemSpec, n_max: int, paths: int, seed: int = 0,
                       backend: Optional[str] = None) -> MomentTable:
    """``sup_t E ||U^n(t)||**2`` for ``n = 0..n_max`` against the uniform envelope."""
    rep = solve_ensemble(spec, paths, seed, n_iters=n_max, backend=backend, keep_solutions=False)
    env = moment_envelope(spec).value(spec.horizon)
    se = rep.moment_se()
    rows = []
    for n in range(n_max + 1):
        k = int(np.argmax(rep.moments[n]))
        rows.append(MomentRow(n, float(rep.moments[n, k]), float(se[n, k]), env))
    done = rep.path_iters[rep.ok]
    stop_iter = int(done.max()) if done.size and (done > 0).all() else n_max
    return MomentTable(rows, env, stop_iter)

