"""Left-point quadrature for the two integral terms of the equation.

``int_0^t g(t, s) K(U(s), U(s - tau)) ds`` is summed levelwise (an Aumann sum
of fuzzy numbers) and ``int_0^t h(t, s) L(U(s), U(s - tau)) dB(s)`` is an
ordinary Ito sum whose real value the caller embeds as a crisp fuzzy number.
Both use the left endpoint of each step, and the kernel is evaluated with the
outer time ``t`` frozen, so every ``t`` gets its own full sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .fuzzy_core import AlphaGrid, FuzzyNumber, GridMismatchError, embed, validate_cuts
from .stochastic_paths import BrownianPair, TimeGrid

SUP_SAMPLES = 200


# ---------------------------------------------------------------------------
# kernels g(t, s), h(t, s)


class Kernel:
    """Continuous kernel on ``0 <= s <= t <= T``.

    Subclasses implement ``__call__(t, s)`` with numpy broadcasting.  The sup
    norm is taken over the causal triangle, the only region the quadrature
    touches.
    """

    def __call__(self, t, s):
        raise NotImplementedError

    def sup_norm(self, horizon: float) -> float:
        return estimate_sup_norm(self, horizon)


@dataclass(frozen=True, eq=False)
class FunctionKernel(Kernel):
    fn: Callable[[float, float], float]
    sup_norm_hint: Optional[float] = None

    def __call__(self, t, s):
        try:
            out = np.asarray(self.fn(t, s), dtype=float)
            if out.shape == np.broadcast_shapes(np.shape(t), np.shape(s)):
                return out
        except (TypeError, ValueError):
            pass
        return np.vectorize(lambda a, b: float(self.fn(a, b)))(t, s)

    def sup_norm(self, horizon: float) -> float:
        if self.sup_norm_hint is not None:
            return float(self.sup_norm_hint)
        return estimate_sup_norm(self, horizon)


def estimate_sup_norm(kernel: Kernel, horizon: float, n: int = SUP_SAMPLES) -> float:
    """Max of ``|kernel|`` over an ``n x n`` sample of the causal triangle."""
    x = np.linspace(0.0, horizon, n)
    t, s = np.meshgrid(x, x, indexing="ij")
    vals = np.abs(kernel(t, s))
    return float(np.max(np.where(s <= t, vals, 0.0)))


def weight_matrix(kernel: Kernel, grid: TimeGrid, with_dt: bool = True) -> np.ndarray:
    """``W[j, k] = kernel(t_j, s_k) * dt`` for ``k < j``, zero elsewhere.

    Rows run over main nodes ``0..n_main``, columns over left endpoints
    ``0..n_main - 1``.  Ito sums take ``with_dt=False``: their increments
    carry the step.
    """
    tm = grid.main_times()
    t = tm[:, None]
    s = tm[None, :-1]
    vals = np.broadcast_to(kernel(t, s), (tm.size, tm.size - 1))
    mask = np.arange(tm.size)[:, None] > np.arange(tm.size - 1)[None, :]
    w = np.where(mask, vals * grid.dt if with_dt else vals, 0.0)
    if not np.isfinite(w).all():
        raise ValueError("kernel is not finite on the grid")
    return w


# ---------------------------------------------------------------------------
# coefficients K: F x F -> F and L: F x F -> R


class Drift:
    """Fuzzy-valued coefficient ``K(u, v)``.

    ``apply`` maps cut arrays of shape ``(..., L, 2)`` to the same shape and
    is what the solver calls; ``__call__`` is the scalar convenience form.
    """

    def apply(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, u: FuzzyNumber, v: FuzzyNumber) -> FuzzyNumber:
        if u.grid != v.grid:
            raise GridMismatchError("drift arguments live on different alpha grids")
        return FuzzyNumber(u.grid, self.apply(u.cuts, v.cuts))

    def is_crisp_preserving(self) -> bool:
        return False


class Diffusion:
    """Real-valued coefficient ``L(u, v)``; ``apply`` returns the batch shape."""

    def apply(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, u: FuzzyNumber, v: FuzzyNumber) -> float:
        return float(self.apply(u.cuts, v.cuts))


def _batched(fn, u, v, alpha, out_tail):
    batch = u.shape[:-2]
    grid = alpha if alpha is not None else AlphaGrid.uniform(u.shape[-2] - 1)
    if grid.size != u.shape[-2]:
        raise GridMismatchError(f"coefficient expects {grid.size} levels, got {u.shape[-2]}")
    out = np.empty(batch + out_tail)
    for idx in np.ndindex(*batch):
        res = fn(FuzzyNumber(grid, u[idx]), FuzzyNumber(grid, v[idx]))
        out[idx] = res.cuts if isinstance(res, FuzzyNumber) else res
    return out


@dataclass(frozen=True, eq=False)
class FunctionDrift(Drift):
    """Wraps a plain ``(FuzzyNumber, FuzzyNumber) -> FuzzyNumber`` callable.

    Evaluated node by node, so much slower than the registry families.  The
    callable receives numbers on ``alpha`` (a uniform grid when omitted).
    """

    fn: Callable[[FuzzyNumber, FuzzyNumber], FuzzyNumber]
    alpha: Optional[AlphaGrid] = None

    def apply(self, u, v):
        return _batched(self.fn, u, v, self.alpha, u.shape[-2:])

    def __call__(self, u, v):
        return self.fn(u, v)


@dataclass(frozen=True, eq=False)
class FunctionDiffusion(Diffusion):
    fn: Callable[[FuzzyNumber, FuzzyNumber], float]
    alpha: Optional[AlphaGrid] = None

    def apply(self, u, v):
        return _batched(self.fn, u, v, self.alpha, ())

    def __call__(self, u, v):
        return float(self.fn(u, v))


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True, eq=False)
class FuzzyPath:
    """One trajectory on every node of ``[-tau, T]``.

    ``values`` has shape ``(n_nodes, L, 2)``; node ``k`` sits at time
    ``-tau + k * dt``.
    """

    grid: TimeGrid
    alpha: AlphaGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n_nodes, self.alpha.size, 2):
            raise ValueError(
                f"path values need shape {(self.grid.n_nodes, self.alpha.size, 2)}, got {vals.shape}"
            )
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, fn: Callable[[float], FuzzyNumber], grid: TimeGrid, alpha: AlphaGrid):
        vals = []
        for t in grid.times():
            u = fn(float(t))
            if u.grid != alpha:
                raise GridMismatchError(f"initial map returned a number on another alpha grid at t={t}")
            vals.append(u.cuts)
        return cls(grid, alpha, np.stack(vals))

    def __len__(self):
        return self.grid.n_nodes

    def __getitem__(self, k: int) -> FuzzyNumber:
        return FuzzyNumber._raw(self.alpha, self.values[k])

    def at(self, t: float) -> FuzzyNumber:
        return self[self.grid.node_of(t)]

    def first_violation(self):
        """``(node, Violation)`` for the first invalid node, else ``None``."""
        for k in range(len(self)):
            v = validate_cuts(self.values[k])
            if v is not None:
                return k, v
        return None

    def is_crisp(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.values - self.values[:, -1:, :1]) <= atol))


def node_arguments(values: np.ndarray, grid: TimeGrid, tau_steps: Optional[int] = None):
    """Current and delayed arguments at the left endpoints ``s_0..s_{n-1}``.

    ``values`` has the node axis first: ``(n_nodes, ...)``.  Returns two arrays
    of shape ``(n_main, ...)``.
    """
    lag = grid.n_pre if tau_steps is None else int(tau_steps)
    start = grid.n_pre - lag
    if start < 0:
        raise IndexError(f"delay of {lag} steps reaches before the first node (only {grid.n_pre} history steps)")
    cur = values[grid.n_pre:grid.n_pre + grid.n_main]
    delayed = values[start:start + grid.n_main]
    return cur, delayed


def aumann_sums(weights: np.ndarray, drift_values: np.ndarray, backend: Optional[str] = None) -> np.ndarray:
    """All Aumann sums at once: row ``j`` of ``weights`` gives the sum at main node ``j``."""
    return _kernels.fuzzy_weighted_sum(weights, drift_values, backend)


def ito_sums(weights: np.ndarray, diffusion_values: np.ndarray, db: np.ndarray,
             backend: Optional[str] = None) -> np.ndarray:
    return _kernels.crisp_weighted_sum(weights, diffusion_values * db, backend)


def _check_node(t_index: int, grid: TimeGrid) -> int:
    if not 0 <= t_index <= grid.n_main:
        raise IndexError(f"main node {t_index} outside 0..{grid.n_main}")
    return int(t_index)


def aumann_integral(t_index: int, kernel: Kernel, drift: Drift, path: FuzzyPath,
                    tau_steps: Optional[int] = None) -> FuzzyNumber:
    """Left Riemann sum of ``kernel(t, s) (.) drift(U(s), U(s - tau))`` up to main node ``t_index``."""
    j = _check_node(t_index, path.grid)
    if j == 0:
        return embed(0.0, path.alpha)
    cur, delayed = node_arguments(path.values, path.grid, tau_steps)
    w = weight_matrix(kernel, path.grid)[j:j + 1, :j]
    dv = drift.apply(cur[:j], delayed[:j])
    return FuzzyNumber._raw(path.alpha, aumann_sums(w, dv)[0])


def ito_integral(t_index: int, kernel: Kernel, diffusion: Diffusion, path: FuzzyPath,
                 tau_steps: Optional[int], b) -> float:
    """Left-point Ito sum of ``kernel(t, s) * diffusion(U(s), U(s - tau)) dB(s)``.

    ``b`` is the Brownian path on the main nodes (length ``n_main + 1``).
    """
    j = _check_node(t_index, path.grid)
    b = np.asarray(b, dtype=float)
    if b.shape != (path.grid.n_main + 1,):
        raise ValueError(f"Brownian path needs {path.grid.n_main + 1} values, got {b.shape}")
    if j == 0:
        return 0.0
    cur, delayed = node_arguments(path.values, path.grid, tau_steps)
    w = weight_matrix(kernel, path.grid, with_dt=False)[j:j + 1, :j]
    lv = diffusion.apply(cur[:j], delayed[:j])
    return float(ito_sums(w, lv, np.diff(b)[:j])[0])


__all__ = [
    "BrownianPair",
    "Diffusion",
    "Drift",
    "FunctionDiffusion",
    "FunctionDrift",
    "FunctionKernel",
    "FuzzyPath",
    "Kernel",
    "aumann_integral",
    "aumann_sums",
    "estimate_sup_norm",
    "ito_integral",
    "ito_sums",
    "node_arguments",
    "weight_matrix",
]
