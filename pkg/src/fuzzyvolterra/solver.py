"""Picard iteration for the symmetric fuzzy stochastic Volterra equation.

On every main node ``t`` one sweep computes::

    A = Phi(t) + sum_s g2(t, s) K2(U(s), U(s - tau)) ds
    S = A (-H) sum_s g1(t, s) K1(U(s), U(s - tau)) ds       (Hukuhara difference)
    U_next(t) = S + < sum_s h2 L2 dB2 - sum_s h1 L1 dB1 >

and pins ``U_next = Phi`` on ``[-tau, 0]``.  The crisp Ito part is added after
the Hukuhara difference, which is legitimate because a crisp shift never
changes whether a Hukuhara difference exists.

All arrays are node-major, ``(n_nodes, n_paths, L, 2)``, so the Volterra sums
are plain matrix products over the node axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import fuzzy_core as fc
from .fuzzy_core import AlphaGrid, FuzzyNumber, HukuharaError
from .integrals import (
    Diffusion,
    Drift,
    FuzzyPath,
    Kernel,
    aumann_sums,
    ito_sums,
    node_arguments,
    weight_matrix,
)
from .stochastic_paths import BrownianPair, TimeGrid, make_grid, sample_increments

HUKUHARA_RTOL = 1e-12
C_SAFETY = 1.5
C_SAMPLES = 10_000


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    tau: float
    horizon: float
    dt: float
    alpha: AlphaGrid
    phi: Callable[[float], FuzzyNumber]
    g1: Kernel
    g2: Kernel
    h1: Kernel
    h2: Kernel
    K1: Drift
    K2: Drift
    L1: Diffusion
    L2: Diffusion
    rho: float = 0.0
    lipschitz_C: Optional[float] = None

    @property
    def grid(self) -> TimeGrid:
        return make_grid(self.tau, self.horizon, self.dt)

    def initial_path(self) -> FuzzyPath:
        path = FuzzyPath.from_function(self.phi, self.grid, self.alpha)
        bad = path.first_violation()
        if bad is not None:
            raise ConfigurationError(f"initial map is not a fuzzy number at node {bad[0]}: {bad[1].detail}")
        return path

    def phi_sup_norm_sq(self) -> float:
        """``sup_t ||Phi(t)||**2`` over every node of ``[-tau, T]``."""
        return float(np.max(fc.norm_cuts(self.initial_path().values)) ** 2)


@dataclass(frozen=True)
class StoppingRule:
    tol: float = 1e-8
    max_iters: int = 50


@dataclass(frozen=True)
class BoundConstants:
    xi: float
    zeta: float
    C: float

    def cz_bound(self, n: int, t: float) -> float:
        """Factorial bound on ``E sup_{z<=t} d**2(U^n, U^{n-1})``."""
        if self.zeta == 0.0:
            return self.xi * t if n == 1 else 0.0
        return self.xi / (2 * self.zeta) * math.exp(n * math.log(2 * self.zeta * t) - math.lgamma(n + 1)) \
            if t > 0 else 0.0


@dataclass(frozen=True)
class HukuharaFailure:
    iteration: int
    node: int
    time: float
    level: int
    deficit: float
    kind: str
    path: int = 0


@dataclass
class SolveReport:
    solution: FuzzyPath
    succ_diff: List[float]
    n_iters: int
    converged: bool
    status: str  # "converged" | "max-iters" | "hukuhara-failure"
    hukuhara_failures: List[HukuharaFailure] = field(default_factory=list)
    bound: Optional[BoundConstants] = None
    iterates_kept: Optional[List[FuzzyPath]] = None


# ---------------------------------------------------------------------------
# engine


class PicardEngine:
    """Precomputed quadrature weights and initial values for one problem."""

    def __init__(self, spec: ProblemSpec, backend: Optional[str] = None):
        self.spec = spec
        self.grid = spec.grid
        self.alpha = spec.alpha
        self.backend = backend
        self.phi = spec.initial_path().values
        self.w = {name: weight_matrix(getattr(spec, name), self.grid, with_dt=name[0] == "g")
                  for name in ("g1", "g2", "h1", "h2")}
        self.active = {name: bool(w.any()) for name, w in self.w.items()}

    def start(self, n_paths: int) -> np.ndarray:
        return np.repeat(self.phi[:, None], n_paths, axis=1)

    def step(self, values: np.ndarray, db1: np.ndarray, db2: np.ndarray):
        """One Picard sweep for a batch.

        ``values``: ``(n_nodes, P, L, 2)``; ``db1``, ``db2``: ``(n_main, P)``.
        Returns the new values and the batched Hukuhara result on the main
        nodes (``ok`` has shape ``(n_main + 1, P)``).
        """
        spec, g = self.spec, self.grid
        cur, delayed = node_arguments(values, g)
        n_paths = values.shape[1]
        phi_main = self.phi[g.n_pre:, None]
        a = np.broadcast_to(phi_main, (g.n_main + 1, n_paths) + phi_main.shape[2:])
        if self.active["g2"]:
            a = a + aumann_sums(self.w["g2"], spec.K2.apply(cur, delayed), self.backend)
        if self.active["g1"]:
            sub = aumann_sums(self.w["g1"], spec.K1.apply(cur, delayed), self.backend)
        else:
            sub = np.zeros_like(a)
        atol = HUKUHARA_RTOL * max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
        hk = fc.hukuhara_cuts(a, sub, atol=atol)
        crisp = np.zeros((g.n_main + 1, n_paths))
        if self.active["h2"]:
            crisp = crisp + ito_sums(self.w["h2"], spec.L2.apply(cur, delayed), db2, self.backend)
        if self.active["h1"]:
            crisp = crisp - ito_sums(self.w["h1"], spec.L1.apply(cur, delayed), db1, self.backend)
        main = hk.diff + crisp[..., None, None]
        out = np.concatenate([np.broadcast_to(self.phi[:g.n_pre, None], (g.n_pre,) + main.shape[1:]), main])
        return out, hk

    def failures(self, hk, iteration: int, paths=None) -> List[HukuharaFailure]:
        out = []
        bad_nodes, bad_paths = np.nonzero(~hk.ok)
        seen = set()
        for j, p in zip(bad_nodes, bad_paths):
            if p in seen:
                continue  # first failing node per path only
            seen.add(p)
            out.append(HukuharaFailure(
                iteration=iteration,
                node=int(self.grid.n_pre + j),
                time=float(j * self.grid.dt),
                level=int(hk.level[j, p]),
                deficit=float(hk.deficit[j, p]),
                kind="nesting" if hk.nesting[j, p] else "width",
                path=int(p if paths is None else paths[p]),
            ))
        return out


def _as_values(prev, engine: PicardEngine) -> np.ndarray:
    vals = prev.values if isinstance(prev, FuzzyPath) else np.asarray(prev, dtype=float)
    if vals.shape != engine.phi.shape:
        raise ValueError(f"iterate has shape {vals.shape}, expected {engine.phi.shape}")
    return vals


def picard_step(prev: FuzzyPath, spec: ProblemSpec, b: BrownianPair,
                engine: Optional[PicardEngine] = None) -> FuzzyPath:
    """One Picard iterate on a single Brownian pair.

    Raises
    ------
    HukuharaError
        When the Hukuhara difference fails to exist at some main node; the
        exception carries the global node index, level and deficit.
    """
    engine = engine or PicardEngine(spec)
    vals = _as_values(prev, engine)
    out, hk = engine.step(vals[:, None], b.db1[:, None], b.db2[:, None])
    if not hk.ok.all():
        f = engine.failures(hk, iteration=0)[0]
        raise HukuharaError(f.level, f.deficit, f.kind, node=f.node)
    return FuzzyPath(engine.grid, engine.alpha, out[:, 0])


def solve_path(spec: ProblemSpec, b: BrownianPair, stop: StoppingRule = StoppingRule(),
               initial=None, keep_iterates: bool = False, backend: Optional[str] = None,
               with_bound: bool = True) -> SolveReport:
    """Iterate to a fixed point on one Brownian pair.

    ``initial`` overrides the starting iterate (default ``Phi`` everywhere).
    A Hukuhara failure stops the iteration; the report then holds the last
    valid iterate and ``status == "hukuhara-failure"``.
    """
    engine = PicardEngine(spec, backend)
    cur = engine.phi.copy() if initial is None else _as_values(initial, engine).copy()
    db1, db2 = b.db1[:, None], b.db2[:, None]
    succ: List[float] = []
    kept = [FuzzyPath(engine.grid, engine.alpha, cur)] if keep_iterates else None
    status = "max-iters"
    failures: List[HukuharaFailure] = []
    for n in range(1, stop.max_iters + 1):
        new, hk = engine.step(cur[:, None], db1, db2)
        if not hk.ok.all():
            failures = engine.failures(hk, iteration=n)
            status = "hukuhara-failure"
            break
        new = new[:, 0]
        succ.append(float(np.max(np.abs(new - cur))))
        cur = new
        if kept is not None:
            kept.append(FuzzyPath(engine.grid, engine.alpha, cur))
        if succ[-1] < stop.tol:
            status = "converged"
            break
    bound = None
    if with_bound and (spec.lipschitz_C is not None):
        bound = bound_constants(spec)
    return SolveReport(
        solution=FuzzyPath(engine.grid, engine.alpha, cur),
        succ_diff=succ,
        n_iters=len(succ),
        converged=status == "converged",
        status=status,
        hukuhara_failures=failures,
        bound=bound,
        iterates_kept=kept,
    )


# ---------------------------------------------------------------------------
# ensembles


@dataclass
class PathEnsembleReport:
    """Per-iteration statistics over many independently driven paths.

    ``sq_sup_diff[p, n-1]`` is ``sup_t d**2(U^n(t), U^{n-1}(t))`` on path ``p``;
    ``moments[n, k]`` is the path average of ``||U^n(node k)||**2``.  Paths
    that hit a Hukuhara failure are excluded from both.
    """

    grid: TimeGrid
    alpha: AlphaGrid
    seed: int
    streams: np.ndarray
    sq_sup_diff: np.ndarray
    moments: np.ndarray
    path_iters: np.ndarray  # first n with succ_diff < tol, -1 if never
    ok: np.ndarray
    failures: List[HukuharaFailure]
    tol: float
    moments_sq: Optional[np.ndarray] = None
    solutions: Optional[np.ndarray] = None  # (n_nodes, P, L, 2)

    @property
    def n_paths(self) -> int:
        return int(self.ok.sum())

    @property
    def n_iters(self) -> int:
        return self.sq_sup_diff.shape[1]

    @property
    def converged(self) -> bool:
        return bool(self.ok.any() and (self.path_iters[self.ok] > 0).all())

    def succ_stats(self):
        """Mean and standard error of ``E sup_t d**2(U^n, U^{n-1})`` for each n."""
        x = self.sq_sup_diff[self.ok]
        return mean_se(x)

    def moment_sup(self) -> np.ndarray:
        """``sup_t E ||U^n(t)||**2`` for ``n = 0..n_iters``."""
        return self.moments.max(axis=1)

    def moment_se(self) -> np.ndarray:
        """Standard errors of ``moments``, same shape."""
        n = self.n_paths
        if n < 2:
            return np.zeros_like(self.moments)
        var = np.maximum(self.moments_sq - self.moments ** 2, 0.0) * n / (n - 1)
        return np.sqrt(var / n)

    def solution(self, p: int) -> FuzzyPath:
        return FuzzyPath(self.grid, self.alpha, self.solutions[:, p])


def mean_se(x: np.ndarray, axis: int = 0):
    x = np.asarray(x, dtype=float)
    n = x.shape[axis]
    mean = x.mean(axis=axis)
    se = x.std(axis=axis, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


def solve_ensemble(spec: ProblemSpec, paths: int, seed: int, stop: StoppingRule = StoppingRule(),
                   n_iters: Optional[int] = None, initial=None, keep_solutions: bool = True,
                   backend: Optional[str] = None, engine: Optional[PicardEngine] = None,
                   stream_offset: int = 0) -> PathEnsembleReport:
    """Picard iteration on ``paths`` Brownian pairs, all advanced in lockstep.

    Path ``p`` is driven by ``SeedSpec(seed, stream_offset + p)``, so two
    ensembles with the same seed share their noise (common random numbers).
    Without ``n_iters`` the sweep runs until every surviving path has met the
    tolerance or ``stop.max_iters`` is reached; with it, exactly ``n_iters``
    sweeps are done.
    """
    engine = engine or PicardEngine(spec, backend)
    g = engine.grid
    streams = np.arange(stream_offset, stream_offset + paths)
    db1, db2 = sample_increments(g, spec.rho, seed, streams)
    if initial is None:
        cur = engine.start(paths)
    else:
        init = _as_values(initial, engine)
        cur = np.repeat(init[:, None], paths, axis=1)
    ok = np.ones(paths, dtype=bool)
    path_iters = np.full(paths, -1)
    diffs = []
    moments = [_moments(cur, ok)]  # (mean, mean of squares) per node
    failures: List[HukuharaFailure] = []
    limit = n_iters if n_iters is not None else stop.max_iters
    for n in range(1, limit + 1):
        new, hk = engine.step(cur, db1, db2)
        bad = ~hk.ok.all(axis=0) & ok
        if bad.any():
            sub = fc.HukuharaResult(*(np.asarray(a)[:, bad] for a in hk))
            failures.extend(engine.failures(sub, iteration=n, paths=np.nonzero(bad)[0]))
            ok &= ~bad
            new[:, bad] = cur[:, bad]
        d = np.abs(new - cur).max(axis=(0, 2, 3))
        d[~ok] = np.nan  # failed paths have no further iterates
        diffs.append(d ** 2)
        cur = new
        moments.append(_moments(cur, ok))
        newly = ok & (path_iters < 0) & (d < stop.tol)
        path_iters[newly] = n
        if n_iters is None and (path_iters[ok] > 0).all():
            break
    return PathEnsembleReport(
        grid=g,
        alpha=engine.alpha,
        seed=seed,
        streams=streams,
        sq_sup_diff=np.stack(diffs, axis=1) if diffs else np.zeros((paths, 0)),
        moments=np.stack([m[0] for m in moments]),
        moments_sq=np.stack([m[1] for m in moments]),
        path_iters=path_iters,
        ok=ok,
        failures=failures,
        tol=stop.tol,
        solutions=cur if keep_solutions else None,
    )


def _moments(values: np.ndarray, ok: np.ndarray):
    sq = fc.norm_cuts(values[:, ok]) ** 2
    if not sq.shape[1]:
        return np.zeros(values.shape[0]), np.zeros(values.shape[0])
    return sq.mean(axis=1), (sq ** 2).mean(axis=1)


# ---------------------------------------------------------------------------
# constants of the convergence theory


def _norms(spec: ProblemSpec):
    T = spec.horizon
    return {k: getattr(spec, k).sup_norm(T) for k in ("g1", "g2", "h1", "h2")}


def estimate_constant(spec: ProblemSpec, samples: int = C_SAMPLES, seed: int = 0,
                      safety: float = C_SAFETY) -> float:
    """Sampled Lipschitz/growth constant, inflated by ``safety``.

    Difference quotients and growth ratios of all four coefficients are
    evaluated on random fuzzy arguments; the largest observed ratio is scaled
    by the safety factor.
    """
    rng = np.random.default_rng(seed)
    L = spec.alpha.size
    u1, v1, u2, v2 = (fc.random_cuts(rng, (samples,), L, scale=3.0) for _ in range(4))
    den_lip = fc.dinf_cuts(u1, u2) ** 2 + fc.dinf_cuts(v1, v2) ** 2
    den_grow = 1.0 + fc.norm_cuts(u1) ** 2 + fc.norm_cuts(v1) ** 2
    worst = 0.0
    for K in (spec.K1, spec.K2):
        a, b = K.apply(u1, v1), K.apply(u2, v2)
        worst = max(worst, np.max(fc.dinf_cuts(a, b) ** 2 / den_lip), np.max(fc.norm_cuts(a) ** 2 / den_grow))
    for Lc in (spec.L1, spec.L2):
        a, b = Lc.apply(u1, v1), Lc.apply(u2, v2)
        worst = max(worst, np.max((a - b) ** 2 / den_lip), np.max(a ** 2 / den_grow))
    return safety * float(worst)


def resolve_constant(spec: ProblemSpec, estimate: bool = True) -> float:
    if spec.lipschitz_C is not None:
        return float(spec.lipschitz_C)
    if not estimate:
        raise ConfigurationError("no Lipschitz constant given and estimation is disabled")
    return estimate_constant(spec)


def bound_constants(spec: ProblemSpec, estimate: bool = True) -> BoundConstants:
    """Constants of the successive-difference bound.

    ``zeta = 4C [|g2|^2 T + |g1|^2 T + 4|h2|^2 + 4|h1|^2]`` and ``xi`` is the
    coefficient of ``t`` in the first-iterate estimate,
    ``xi = zeta * (1 + 2 sup_t ||Phi(t)||^2)``.
    """
    C = resolve_constant(spec, estimate)
    nm = _norms(spec)
    T = spec.horizon
    zeta = 4 * C * (nm["g2"] ** 2 * T + nm["g1"] ** 2 * T + 4 * nm["h2"] ** 2 + 4 * nm["h1"] ** 2)
    xi = zeta * (1 + 2 * spec.phi_sup_norm_sq())
    return BoundConstants(xi=float(xi), zeta=float(zeta), C=C)


@dataclass(frozen=True)
class CZCheck:
    n: int
    estimate: float
    se: float
    bound: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.bound + 3 * self.se - self.estimate


def check_cz_bound(report: PathEnsembleReport, bound: BoundConstants, t: Optional[float] = None,
                   min_paths: int = 100, n_max: Optional[int] = None) -> List[CZCheck]:
    """Compare the Monte Carlo estimate of ``E sup d**2(U^n, U^{n-1})`` with the bound.

    A row passes when ``estimate <= bound + 3 * SE``.
    """
    if report.n_paths < min_paths:
        raise ValueError(f"need at least {min_paths} surviving paths, have {report.n_paths}")
    t = report.grid.t_end if t is None else t
    mean, se = report.succ_stats()
    rows = []
    upto = report.n_iters if n_max is None else min(n_max, report.n_iters)
    for n in range(1, upto + 1):
        b = bound.cz_bound(n, t)
        rows.append(CZCheck(n, float(mean[n - 1]), float(se[n - 1]), b, bool(mean[n - 1] <= b + 3 * se[n - 1])))
    return rows


@dataclass(frozen=True)
class MomentEnvelope:
    M3: float
    M4: float
    M5: float

    def value(self, t: float) -> float:
        return self.M5 * math.exp(self.M4 * t)


def moment_envelope(spec: ProblemSpec, estimate: bool = True) -> MomentEnvelope:
    """Gronwall envelope for ``sup_t E ||U^n(t)||**2``, uniform in n.

    With ``P = sup ||Phi||**2`` and
    ``A = 5C [T |g2|^2 + T |g1|^2 + |h2|^2 + |h1|^2]`` the iterates satisfy
    ``f_n(t) <= 5P + A T (1 + P) + 2A int_0^t f_{n-1}``, and bounding the
    previous iterate by ``P`` plus the running maximum gives
    ``M4 = 2A`` and ``M5 = 5P + A T (1 + 3P)``.
    """
    C = resolve_constant(spec, estimate)
    nm = _norms(spec)
    T = spec.horizon
    P = spec.phi_sup_norm_sq()
    A = 5 * C * (T * nm["g2"] ** 2 + T * nm["g1"] ** 2 + nm["h2"] ** 2 + nm["h1"] ** 2)
    M3 = 5 * P + A * T * (1 + P)
    return MomentEnvelope(M3=M3, M4=2 * A, M5=M3 + 2 * A * T * P)


def initial_value_gamma(spec: ProblemSpec, estimate: bool = True) -> float:
    """Gronwall rate for the initial-value dependence bound ``5 exp(2 gamma T)``."""
    C = resolve_constant(spec, estimate)
    nm = _norms(spec)
    T = spec.horizon
    return C * (5 * nm["g2"] ** 2 * T + 5 * nm["g1"] ** 2 * T + 20 * nm["h2"] ** 2 + 20 * nm["h1"] ** 2)
