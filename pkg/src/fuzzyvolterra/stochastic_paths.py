"""Time grids on ``[-tau, T]`` and seeded pairs of correlated Brownian paths.

Each path draws from its own substream: ``SeedSequence(seed, spawn_key=(stream_id,))``
feeding a PCG64 generator.  The first ``n_main`` normals are the increments of
``B1``; the next ``n_main`` are the independent normals mixed into ``B2``.  A
path therefore depends only on ``(seed, stream_id)``, never on how many other
paths were generated alongside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid with ``n_pre`` steps on ``[-tau, 0]`` and ``n_main`` on ``[0, T]``."""

    dt: float
    n_pre: int
    n_main: int

    @property
    def tau(self) -> float:
        return self.n_pre * self.dt

    @property
    def t_end(self) -> float:
        return self.n_main * self.dt

    @property
    def t0(self) -> float:
        return -self.tau

    @property
    def n_nodes(self) -> int:
        return self.n_pre + self.n_main + 1

    def times(self) -> np.ndarray:
        """All node times, ``-tau + k * dt``."""
        return (np.arange(self.n_nodes) - self.n_pre) * self.dt

    def main_times(self) -> np.ndarray:
        return np.arange(self.n_main + 1) * self.dt

    def node_of(self, t: float) -> int:
        """Global node index of time ``t`` (must be a grid point)."""
        k = (t + self.tau) / self.dt
        kr = round(k)
        if abs(k - kr) > 1e-9 * max(1.0, abs(k)) or not 0 <= kr < self.n_nodes:
            raise GridError(f"t={t} is not a node of the grid")
        return int(kr)


def _steps(length: float, dt: float, name: str) -> int:
    q = length / dt
    n = round(q)
    if abs(q - n) > 1e-9 * max(1.0, abs(q)):
        raise GridError(f"{name}={length} is not an integer multiple of dt={dt}")
    return int(n)


def make_grid(tau: float, horizon: float, dt: float) -> TimeGrid:
    if not (math.isfinite(tau) and math.isfinite(horizon) and math.isfinite(dt)):
        raise GridError("tau, horizon and dt must be finite")
    if dt <= 0:
        raise GridError(f"dt must be positive, got {dt}")
    if tau < 0:
        raise GridError(f"tau must be >= 0, got {tau}")
    if horizon <= 0:
        raise GridError(f"horizon must be positive, got {horizon}")
    return TimeGrid(float(dt), _steps(tau, dt, "tau"), _steps(horizon, dt, "horizon"))


@dataclass(frozen=True)
class SeedSpec:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.stream_id < 0:
            raise ValueError("stream_id must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class BrownianPair:
    """Two Brownian paths sampled on the main nodes ``0, dt, ..., T``."""

    grid: TimeGrid
    b1: np.ndarray
    b2: np.ndarray
    rho: float

    @property
    def db1(self) -> np.ndarray:
        return np.diff(self.b1)

    @property
    def db2(self) -> np.ndarray:
        return np.diff(self.b2)


def _check_rho(rho: float) -> float:
    rho = float(rho)
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"correlation must lie in [-1, 1], got {rho}")
    return rho


def _increments(n: int, dt: float, rho: float, rng: np.random.Generator):
    z = rng.standard_normal(2 * n)
    xi, eta = z[:n], z[n:]
    sq = math.sqrt(dt)
    d1 = sq * xi
    if rho == 1.0:
        d2 = d1.copy()
    else:
        d2 = sq * (rho * xi + math.sqrt(1.0 - rho * rho) * eta)
    return d1, d2


def _cumulate(d: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(d)])


def sample_brownian_pair(grid: TimeGrid, rho: float, seed: SeedSpec) -> BrownianPair:
    rho = _check_rho(rho)
    d1, d2 = _increments(grid.n_main, grid.dt, rho, seed.generator())
    return BrownianPair(grid, _cumulate(d1), _cumulate(d2), rho)


def sample_increments(grid: TimeGrid, rho: float, seed: int, streams) -> tuple:
    """Increments for many paths at once, shape ``(n_main, n_paths)`` each.

    Column ``p`` is bit-identical to ``np.diff`` of the paths returned by
    ``sample_brownian_pair(grid, rho, SeedSpec(seed, streams[p]))``.
    """
    rho = _check_rho(rho)
    streams = list(streams)
    d1 = np.empty((grid.n_main, len(streams)))
    d2 = np.empty_like(d1)
    for p, sid in enumerate(streams):
        x1, x2 = _increments(grid.n_main, grid.dt, rho, SeedSpec(seed, sid).generator())
        d1[:, p] = np.diff(_cumulate(x1))
        d2[:, p] = np.diff(_cumulate(x2))
    return d1, d2
