"""Vectorised checks of the algebraic and metric identities of fuzzy arithmetic.

Each check draws a batch of random fuzzy numbers, evaluates both sides of one
identity or inequality, and returns a :class:`PropertyResult`.  Identities
built only from additions are compared exactly on dyadic inputs (every value
a small multiple of a power of two, so no rounding occurs); everything else
uses an absolute tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from . import fuzzy_core as fc
from .integrals import aumann_sums

TOL = 1e-12


@dataclass(frozen=True)
class PropertyResult:
    name: str
    cases: int
    violations: int
    max_error: float

    @property
    def ok(self) -> bool:
        return self.cases > 0 and self.violations == 0


def _result(name, err, tol) -> PropertyResult:
    err = np.asarray(err, dtype=float).ravel()
    return PropertyResult(name, err.size, int((err > tol).sum()), float(err.max()) if err.size else 0.0)


def _cuts(rng, n, L, dyadic, scale=4.0):
    return fc.random_cuts(rng, (n,), L, scale=scale, dyadic=dyadic, crisp_fraction=0.1)


def _crisp(rng, n, L, dyadic, scale=4.0):
    if dyadic:
        r = rng.integers(-256, 257, size=n) * (scale / 64)
    else:
        r = rng.uniform(-scale, scale, size=n)
    return np.broadcast_to(r[:, None, None], (n, L, 2)).copy()


def _max_abs(a, b):
    return np.abs(a - b).max(axis=(-2, -1))


def _existing(rng, n, L, dyadic):
    """Pairs ``(u, v)`` whose Hukuhara difference exists, built as ``u = v + w``."""
    v = _cuts(rng, n, L, dyadic)
    w = _cuts(rng, n, L, dyadic)
    return v + w, v, w


def check_p1(rng, n, L, dyadic=True) -> PropertyResult:
    u, r1, r2 = _cuts(rng, n, L, dyadic), _crisp(rng, n, L, dyadic), _crisp(rng, n, L, dyadic)
    lhs = fc.hukuhara_cuts(u + r1, r2)
    err = np.where(lhs.ok, _max_abs(lhs.diff, u + (r1 - r2)), np.inf)
    return _result("P1", err, 0.0 if dyadic else TOL)


def check_p2(rng, n, L, dyadic=True) -> PropertyResult:
    # mix of existing and non-existing differences
    u, v = _cuts(rng, n, L, dyadic), _cuts(rng, n, L, dyadic, scale=2.0)
    r1 = _crisp(rng, n, L, dyadic)
    left = fc.hukuhara_cuts(u + r1, v)
    right = fc.hukuhara_cuts(u, v)
    same_existence = left.ok == right.ok
    err = np.where(right.ok, _max_abs(left.diff, right.diff + r1), 0.0)
    err = np.where(same_existence, err, np.inf)
    return _result("P2", err, 0.0 if dyadic else TOL)


def check_p3(rng, n, L, dyadic=True) -> PropertyResult:
    u, v, w = (_cuts(rng, n, L, dyadic) for _ in range(3))
    err = np.abs(fc.dinf_cuts(u + w, v + w) - fc.dinf_cuts(u, v))
    return _result("P3", err, 0.0 if dyadic else TOL)


def check_p4(rng, n, L, dyadic=False) -> PropertyResult:
    u, v, w, z = (_cuts(rng, n, L, dyadic) for _ in range(4))
    excess = fc.dinf_cuts(u + v, w + z) - (fc.dinf_cuts(u, w) + fc.dinf_cuts(v, z))
    return _result("P4", np.maximum(excess, 0.0), TOL)


def check_p5(rng, n, L, dyadic=False) -> PropertyResult:
    u, v = _cuts(rng, n, L, dyadic), _cuts(rng, n, L, dyadic)
    beta = rng.uniform(-5, 5, size=n)
    beta[: n // 10] = 0.0
    lhs = fc.dinf_cuts(fc.scale_cuts(beta, u), fc.scale_cuts(beta, v))
    err = np.abs(lhs - np.abs(beta) * fc.dinf_cuts(u, v))
    return _result("P5", err, TOL * np.maximum(1.0, np.abs(lhs)).max())


def check_p6(rng, n, L, dyadic=True) -> PropertyResult:
    u, v, _ = _existing(rng, n, L, dyadic)
    d = fc.hukuhara_cuts(u, v)
    err = np.abs(fc.norm_cuts(d.diff) - fc.dinf_cuts(u, v))
    # off the lattice, rounding can make an existing difference look absent
    err = err[d.ok] if not dyadic else np.where(d.ok, err, np.inf)
    return _result("P6", err, 0.0 if dyadic else TOL)


def check_p7(rng, n, L, dyadic=True) -> PropertyResult:
    # u is wide, v and w narrow, so both differences usually exist
    base = _cuts(rng, n, L, dyadic, scale=8.0)
    v, w = _cuts(rng, n, L, dyadic, scale=1.0), _cuts(rng, n, L, dyadic, scale=1.0)
    u = base + v + w
    a, b = fc.hukuhara_cuts(u, v), fc.hukuhara_cuts(u, w)
    keep = a.ok & b.ok
    err = np.abs(fc.dinf_cuts(a.diff, b.diff) - fc.dinf_cuts(v, w))[keep]
    return _result("P7", err, 0.0 if dyadic else TOL)


def check_p8(rng, n, L, dyadic=False) -> PropertyResult:
    u, v, _ = _existing(rng, n, L, dyadic)
    w, z, _ = _existing(rng, n, L, dyadic)
    a, b = fc.hukuhara_cuts(u, v), fc.hukuhara_cuts(w, z)
    keep = a.ok & b.ok
    excess = fc.dinf_cuts(a.diff, b.diff) - (fc.dinf_cuts(u, w) + fc.dinf_cuts(v, z))
    return _result("P8", np.maximum(excess, 0.0)[keep], TOL)


def check_round_trip(rng, n, L, dyadic=True) -> PropertyResult:
    u, v, _ = _existing(rng, n, L, dyadic)
    d = fc.hukuhara_cuts(u, v)
    err = _max_abs(v + d.diff, u)
    if dyadic:
        return _result("round-trip", np.where(d.ok, err, np.inf), 0.0)
    return _result("round-trip", err[d.ok], TOL)


def check_metric_axioms(rng, n, L, dyadic=False) -> PropertyResult:
    u, v, w = (_cuts(rng, n, L, dyadic) for _ in range(3))
    duv, dvu = fc.dinf_cuts(u, v), fc.dinf_cuts(v, u)
    err = np.stack([
        np.maximum(-duv, 0.0),
        np.abs(duv - dvu),
        fc.dinf_cuts(u, u),
        np.maximum(duv - fc.dinf_cuts(u, w) - fc.dinf_cuts(w, v), 0.0),
        np.where(duv == 0, _max_abs(u, v), 0.0),
    ])
    return _result("metric", err.max(axis=0), TOL)


def check_closure(rng, n, L, dyadic=False) -> PropertyResult:
    u, v = _cuts(rng, n, L, dyadic), _cuts(rng, n, L, dyadic)
    beta = rng.uniform(-5, 5, size=n)
    bad = 0
    for x in (u + v, fc.scale_cuts(beta, u)):
        bad += sum(fc.validate_cuts(x[i]) is not None for i in range(n))
    return PropertyResult("closure", 2 * n, bad, 0.0)


ALGEBRA: Dict[str, Callable] = {
    "P1": check_p1,
    "P2": check_p2,
    "P3": check_p3,
    "P4": check_p4,
    "P5": check_p5,
    "P6": check_p6,
    "P7": check_p7,
    "P8": check_p8,
    "round-trip": check_round_trip,
}


def algebra_suite(n: int = 10_000, levels: int = 11, seed: int = 0) -> List[PropertyResult]:
    """Every identity on ``n`` dyadic and ``n`` general random tuples."""
    rng = np.random.default_rng(seed)
    out = []
    for name, fn in ALGEBRA.items():
        exact, loose = fn(rng, n, levels, True), fn(rng, n, levels, False)
        out.append(PropertyResult(name, exact.cases + loose.cases, exact.violations + loose.violations,
                                  max(exact.max_error, loose.max_error)))
    return out


# ---------------------------------------------------------------------------
# Hausdorff distance against its definition


def hausdorff_sampled(a, b, samples: int = 10_000) -> float:
    """``max(sup_{x in A} dist(x, B), sup_{y in B} dist(y, A))`` with the sups sampled.

    Each interval is sampled at ``samples`` evenly spaced points including its
    endpoints; the distance from a point to an interval is the exact
    ``max(lo - x, 0, x - hi)``.
    """
    def directed(p, q):
        x = np.linspace(p[0], p[1], samples)
        return float(np.max(np.maximum(np.maximum(q[0] - x, 0.0), x - q[1])))

    return max(directed(a, b), directed(b, a))


def hausdorff_oracle_check(pairs: int = 1000, samples: int = 10_000, seed: int = 0) -> PropertyResult:
    rng = np.random.default_rng(seed)
    err = np.empty(pairs)
    for i in range(pairs):
        a = np.sort(rng.uniform(-10, 10, size=2))
        b = np.sort(rng.uniform(-10, 10, size=2))
        if i % 10 == 0:
            b = a + rng.uniform(-1, 1)  # shifted copies
        if i % 10 == 1:
            b = np.array([a[0], a[0]])  # degenerate
        ia, ib = fc.Interval(*a), fc.Interval(*b)
        err[i] = abs(fc.hausdorff(ia, ib) - hausdorff_sampled(a, b, samples))
    return _result("hausdorff", err, 1e-9)


# ---------------------------------------------------------------------------
# Lebesgue-Aumann sums


def _unit_weights(n: int, dt: float) -> np.ndarray:
    return np.tril(np.full((n + 1, n), dt), -1)


def integral_inequalities(paths: int = 1000, n: int = 64, dt: float = 1 / 64, levels: int = 11,
                          seed: int = 0, crisp: bool = False) -> Dict[str, PropertyResult]:
    """Discrete analogues of the integral estimates on random path pairs.

    * pathwise: ``d**2(S_j x, S_j y) <= t_j sum_{k<j} d**2(x_k, y_k) dt`` at every node
    * sup form: ``max_{i<=j} d**2(S_i x, S_i y) <= t_j sum_{k<j} d**2(x_k, y_k) dt``
      pathwise, hence also for the path average
    * continuity: ``d(S_{j+1} x, S_j x) <= dt ||x_j||``

    where ``S_j`` is the left Riemann sum up to node ``j``.
    """
    rng = np.random.default_rng(seed)
    shape = (n, paths)
    x = fc.random_cuts(rng, shape, levels, scale=3.0, crisp_fraction=1.0 if crisp else 0.2)
    y = fc.random_cuts(rng, shape, levels, scale=3.0, crisp_fraction=1.0 if crisp else 0.2)
    w = _unit_weights(n, dt)
    sx, sy = aumann_sums(w, x), aumann_sums(w, y)
    lhs = fc.dinf_cuts(sx, sy) ** 2                        # (n + 1, paths)
    t = np.arange(n + 1)[:, None] * dt
    integ = np.concatenate([np.zeros((1, paths)), np.cumsum(fc.dinf_cuts(x, y) ** 2 * dt, axis=0)])
    rhs = t * integ
    scale = np.maximum(1.0, rhs)
    pathwise = np.maximum(lhs - rhs, 0.0) / scale
    sup_lhs = np.maximum.accumulate(lhs, axis=0)
    sup_form = np.maximum(sup_lhs - rhs, 0.0) / scale
    mean_form = np.maximum(sup_lhs.mean(axis=1) - rhs.mean(axis=1), 0.0)
    step = fc.dinf_cuts(sx[1:], sx[:-1]) - dt * fc.norm_cuts(x)
    tag = "crisp" if crisp else "fuzzy"
    return {
        f"pathwise-{tag}": _result(f"pathwise-{tag}", pathwise, TOL),
        f"sup-{tag}": _result(f"sup-{tag}", sup_form, TOL),
        f"expectation-{tag}": _result(f"expectation-{tag}", mean_form, TOL),
        f"continuity-{tag}": _result(f"continuity-{tag}", np.maximum(step, 0.0), TOL),
    }
