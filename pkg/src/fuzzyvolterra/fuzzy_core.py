"""Fuzzy numbers on the real line stored as stacks of nested alpha-cuts.

A fuzzy number is kept as an array of shape ``(m + 1, 2)``: row ``k`` is the
interval ``[lo, hi]`` of the cut at level ``alpha_k``.  Every operation exists
in two flavours.  The ``*_cuts`` functions act on raw arrays with arbitrary
leading batch dimensions ``(..., m + 1, 2)`` and are what the solver uses; the
:class:`FuzzyNumber` wrapper and the module-level functions taking fuzzy
numbers are the checked, scalar-sized API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

__all__ = [
    "AlphaGrid",
    "FuzzyNumber",
    "GridMismatchError",
    "HukuharaError",
    "Interval",
    "Violation",
    "add",
    "add_cuts",
    "center_cuts",
    "d_inf",
    "dinf_cuts",
    "embed",
    "hausdorff",
    "hukuhara_cuts",
    "hukuhara_sub",
    "norm_F",
    "norm_cuts",
    "random_cuts",
    "from_intervals",
    "scalar_mul",
    "scale_cuts",
    "trapezoidal",
    "triangular",
    "validate",
    "validate_cuts",
]


class GridMismatchError(ValueError):
    """Two fuzzy numbers live on different alpha grids."""


class HukuharaError(ArithmeticError):
    """The Hukuhara difference ``u - v`` does not exist.

    Attributes
    ----------
    level : int
        First alpha-level index at which existence fails.
    deficit : float
        For ``kind == "width"`` the amount by which the subtrahend's cut is
        wider than the minuend's; for ``kind == "nesting"`` the size of the
        nestedness violation of the would-be difference.
    kind : str
        ``"width"`` or ``"nesting"``.
    """

    def __init__(self, level: int, deficit: float, kind: str = "width", node: Optional[int] = None):
        self.level = int(level)
        self.deficit = float(deficit)
        self.kind = kind
        self.node = node
        where = f" at node {node}" if node is not None else ""
        super().__init__(
            f"Hukuhara difference does not exist{where}: {kind} failure at level "
            f"{self.level} (deficit {self.deficit:.3e})"
        )


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"interval endpoints must be finite, got [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo


def hausdorff(a: Interval, b: Interval) -> float:
    """Hausdorff distance of two compact intervals.

    For intervals the two directed sup-inf distances are attained at the
    endpoints, so the metric collapses to the larger endpoint gap.
    """
    return max(abs(a.lo - b.lo), abs(a.hi - b.hi))


@dataclass(frozen=True)
class AlphaGrid:
    """Strictly increasing membership levels from 0 to 1."""

    levels: tuple

    def __post_init__(self):
        lv = tuple(float(x) for x in self.levels)
        object.__setattr__(self, "levels", lv)
        if len(lv) < 2:
            raise ValueError("an alpha grid needs at least the levels 0 and 1")
        if lv[0] != 0.0 or lv[-1] != 1.0:
            raise ValueError("alpha grid must start at 0 and end at 1")
        if any(b <= a for a, b in zip(lv, lv[1:])):
            raise ValueError("alpha levels must be strictly increasing")

    @classmethod
    def uniform(cls, m: int = 10) -> "AlphaGrid":
        if m < 1:
            raise ValueError("m must be >= 1")
        return cls(tuple(k / m for k in range(m + 1)))

    @property
    def m(self) -> int:
        return len(self.levels) - 1

    @property
    def size(self) -> int:
        return len(self.levels)

    def array(self) -> np.ndarray:
        return np.asarray(self.levels)


class Violation(NamedTuple):
    kind: str  # "ordering" | "nesting" | "non-finite"
    level: int
    detail: str


# ---------------------------------------------------------------------------
# array kernels, shape (..., L, 2)


def add_cuts(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a + b


def scale_cuts(beta, a: np.ndarray) -> np.ndarray:
    """Levelwise ``beta * [lo, hi]``; ``beta`` may carry the batch shape."""
    beta = np.asarray(beta, dtype=float)[..., None]
    lo = beta * a[..., 0]
    hi = beta * a[..., 1]
    neg = beta < 0
    return np.stack([np.where(neg, hi, lo), np.where(neg, lo, hi)], axis=-1)


def dinf_cuts(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sup over the grid levels of the Hausdorff distance of the cuts."""
    return np.abs(a - b).max(axis=(-2, -1))


def norm_cuts(a: np.ndarray) -> np.ndarray:
    return np.abs(a).max(axis=(-2, -1))


def center_cuts(a: np.ndarray) -> np.ndarray:
    """Midpoint of the core (the top cut)."""
    return 0.5 * (a[..., -1, 0] + a[..., -1, 1])


class HukuharaResult(NamedTuple):
    diff: np.ndarray
    ok: np.ndarray  # bool, batch shape
    level: np.ndarray  # first failing level, -1 where ok
    deficit: np.ndarray  # 0 where ok
    nesting: np.ndarray  # True where the failure is a nesting failure


def hukuhara_cuts(a: np.ndarray, b: np.ndarray, atol: float = 0.0) -> HukuharaResult:
    """Batched Hukuhara difference ``a - b``.

    The candidate difference is the endpointwise difference of the cuts; it is
    a fuzzy number (and then the unique Hukuhara difference) iff every cut is
    a proper interval and the cuts stay nested.  With ``atol > 0`` violations
    no larger than ``atol`` are accepted and snapped away, which absorbs
    rounding in long sums; ``atol == 0`` is the exact test.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-2:] != b.shape[-2:]:
        raise GridMismatchError(f"cut stacks of shape {a.shape[-2:]} and {b.shape[-2:]}")
    w = a - b
    lo = w[..., 0]
    hi = w[..., 1]
    width_def = lo - hi  # > 0 means empty cut
    # nesting: lo non-decreasing and hi non-increasing in alpha
    nest_def = np.zeros_like(lo)
    nest_def[..., 1:] = np.maximum(lo[..., :-1] - lo[..., 1:], hi[..., 1:] - hi[..., :-1])
    bad_width = width_def > atol
    bad_nest = nest_def > atol
    bad = bad_width | bad_nest
    ok = ~bad.any(axis=-1)
    first = np.where(ok, -1, np.argmax(bad, axis=-1))
    idx = np.clip(first, 0, None)[..., None]
    wd = np.take_along_axis(width_def, idx, axis=-1)[..., 0]
    nd = np.take_along_axis(nest_def, idx, axis=-1)[..., 0]
    is_width = np.take_along_axis(bad_width, idx, axis=-1)[..., 0]
    deficit = np.where(ok, 0.0, np.where(is_width, wd, nd))
    nesting = ~ok & ~is_width
    if atol > 0 and ((width_def > 0).any() or (nest_def > 0).any()):
        w = w.copy()
        w[..., 0] = np.maximum.accumulate(w[..., 0], axis=-1)
        w[..., 1] = np.minimum.accumulate(w[..., 1], axis=-1)
        mid = 0.5 * (w[..., 0] + w[..., 1])
        flip = w[..., 0] > w[..., 1]
        w[..., 0] = np.where(flip, mid, w[..., 0])
        w[..., 1] = np.where(flip, mid, w[..., 1])
    return HukuharaResult(w, ok, first, deficit, nesting)


def validate_cuts(a: np.ndarray) -> Optional[Violation]:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValueError(f"expected a (levels, 2) array, got shape {a.shape}")
    if not np.isfinite(a).all():
        k = int(np.argmax(~np.isfinite(a).all(axis=1)))
        return Violation("non-finite", k, f"cut {k} has a non-finite endpoint")
    for k, (lo, hi) in enumerate(a):
        if lo > hi:
            return Violation("ordering", k, f"cut {k} = [{lo}, {hi}] has lo > hi")
    for k in range(1, len(a)):
        if a[k, 0] < a[k - 1, 0] or a[k, 1] > a[k - 1, 1]:
            return Violation(
                "nesting", k,
                f"cut {k} = [{a[k, 0]}, {a[k, 1]}] is not inside cut {k - 1} = [{a[k - 1, 0]}, {a[k - 1, 1]}]",
            )
    return None


# ---------------------------------------------------------------------------
# value type


class FuzzyNumber:
    """Immutable fuzzy number given by its cuts on an :class:`AlphaGrid`.

    The constructor checks shapes and finiteness only; use :func:`validate`
    to check ordering and nestedness.
    """

    __slots__ = ("grid", "cuts")

    def __init__(self, grid: AlphaGrid, cuts):
        arr = np.array(cuts, dtype=float)
        if arr.shape != (grid.size, 2):
            raise ValueError(f"expected cuts of shape ({grid.size}, 2), got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("cut endpoints must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "cuts", arr)

    def __setattr__(self, name, value):
        raise AttributeError("FuzzyNumber is immutable")

    @classmethod
    def _raw(cls, grid: AlphaGrid, arr: np.ndarray) -> "FuzzyNumber":
        obj = object.__new__(cls)
        arr = np.array(arr, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(obj, "grid", grid)
        object.__setattr__(obj, "cuts", arr)
        return obj

    def cut(self, k: int) -> Interval:
        lo, hi = self.cuts[k]
        return Interval(float(lo), float(hi))

    @property
    def support(self) -> Interval:
        return self.cut(0)

    @property
    def core(self) -> Interval:
        return self.cut(-1)

    def is_crisp(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.cuts - self.cuts[-1, 0]) <= atol))

    def __add__(self, other):
        if isinstance(other, FuzzyNumber):
            return add(self, other)
        return NotImplemented

    def __rmul__(self, beta):
        return scalar_mul(beta, self)

    def __eq__(self, other):
        if not isinstance(other, FuzzyNumber):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.cuts, other.cuts)

    def __hash__(self):
        return hash((self.grid, self.cuts.tobytes()))

    def __repr__(self):
        s, c = self.cuts[0], self.cuts[-1]
        return f"FuzzyNumber(support=[{s[0]:g}, {s[1]:g}], core=[{c[0]:g}, {c[1]:g}], m={self.grid.m})"


def _same_grid(u: FuzzyNumber, v: FuzzyNumber) -> None:
    if u.grid != v.grid:
        raise GridMismatchError(f"alpha grids differ (m={u.grid.m} vs m={v.grid.m})")


def embed(r: float, grid: AlphaGrid) -> FuzzyNumber:
    """The crisp number ``r`` as a fuzzy number (every cut is ``[r, r]``)."""
    r = float(r)
    if not math.isfinite(r):
        raise ValueError(f"cannot embed non-finite value {r}")
    return FuzzyNumber._raw(grid, np.full((grid.size, 2), r))


def triangular(left: float, peak: float, right: float, grid: AlphaGrid) -> FuzzyNumber:
    return trapezoidal(left, peak, peak, right, grid)


def trapezoidal(a: float, b: float, c: float, d: float, grid: AlphaGrid) -> FuzzyNumber:
    if not a <= b <= c <= d:
        raise ValueError("need a <= b <= c <= d")
    al = grid.array()
    lo = a + (b - a) * al
    hi = d - (d - c) * al
    lo[-1], hi[-1] = b, c
    return FuzzyNumber(grid, np.stack([lo, hi], axis=1))


def add(u: FuzzyNumber, v: FuzzyNumber) -> FuzzyNumber:
    _same_grid(u, v)
    return FuzzyNumber._raw(u.grid, u.cuts + v.cuts)


def scalar_mul(beta: float, u: FuzzyNumber) -> FuzzyNumber:
    beta = float(beta)
    if not math.isfinite(beta):
        raise ValueError(f"scalar must be finite, got {beta}")
    c = beta * u.cuts
    if beta < 0:
        c = c[:, ::-1]
    return FuzzyNumber._raw(u.grid, c)


def hukuhara_sub(u: FuzzyNumber, v: FuzzyNumber) -> FuzzyNumber:
    """The unique ``w`` with ``v + w = u``.

    Raises
    ------
    HukuharaError
        If no such ``w`` exists; carries the failing level and deficit.
    """
    _same_grid(u, v)
    res = hukuhara_cuts(u.cuts, v.cuts)
    if not res.ok:
        kind = "nesting" if res.nesting else "width"
        raise HukuharaError(int(res.level), float(res.deficit), kind)
    return FuzzyNumber._raw(u.grid, res.diff)


def d_inf(u: FuzzyNumber, v: FuzzyNumber) -> float:
    _same_grid(u, v)
    return float(dinf_cuts(u.cuts, v.cuts))


def norm_F(u: FuzzyNumber) -> float:
    """Distance from the crisp zero, ``d_inf(u, <0>)``."""
    return float(norm_cuts(u.cuts))


def validate(u: FuzzyNumber) -> Optional[Violation]:
    """First ordering or nesting violation of ``u``, or ``None`` if valid."""
    return validate_cuts(u.cuts)


def from_intervals(grid: AlphaGrid, cuts: Sequence[Interval]) -> FuzzyNumber:
    return FuzzyNumber(grid, [(c.lo, c.hi) for c in cuts])


def random_cuts(rng: np.random.Generator, shape, levels: int, scale: float = 1.0,
                dyadic: bool = False, crisp_fraction: float = 0.0) -> np.ndarray:
    """Random valid cut stacks of shape ``shape + (levels, 2)``.

    Built from the core outwards with non-negative increments, so the result
    is always nested.  ``dyadic=True`` draws every endpoint on a coarse
    binary lattice, which keeps sums and differences of a few such numbers
    exact in floating point.  A ``crisp_fraction`` of the draws is collapsed
    to a single point.
    """
    shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
    if dyadic:
        q = 2.0 ** -6
        center = rng.integers(-64, 65, size=shape) * (scale * q * 8)
        half = rng.integers(0, 9, size=shape) * (scale * q)
        inc = rng.integers(0, 9, size=shape + (levels - 1, 2)) * (scale * q)
    else:
        center = rng.uniform(-scale, scale, size=shape)
        half = rng.uniform(0.0, 0.25 * scale, size=shape)
        inc = rng.uniform(0.0, scale / levels, size=shape + (levels - 1, 2))
    if crisp_fraction > 0:
        crisp = rng.random(size=shape) < crisp_fraction
        half = np.where(crisp, 0.0, half)
        inc = np.where(crisp[..., None, None], 0.0, inc)
    out = np.empty(shape + (levels, 2))
    out[..., -1, 0] = center - half
    out[..., -1, 1] = center + half
    for k in range(levels - 2, -1, -1):
        out[..., k, 0] = out[..., k + 1, 0] - inc[..., k, 0]
        out[..., k, 1] = out[..., k + 1, 1] + inc[..., k, 1]
    return out
