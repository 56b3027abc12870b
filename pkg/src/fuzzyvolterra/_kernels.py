"""Quadrature kernels behind the Volterra sums.

Two interchangeable implementations: explicit loops compiled with numba, and a
pure numpy path built on matrix products.  ``FUZZYVOLTERRA_BACKEND`` selects
one (``numba`` or ``numpy``).  The default is numpy: with an optimised BLAS
the matrix products beat the compiled loops at every batch size measured by
``benchmarks/bench_kernels.py``.  The loops are kept for builds without one.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_ENV = "FUZZYVOLTERRA_BACKEND"


def default_backend() -> str:
    choice = os.environ.get(_ENV, "").strip().lower()
    if choice in ("", "auto"):
        return "numpy"
    if choice not in ("numba", "numpy"):
        raise ValueError(f"{_ENV} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numba" and not HAVE_NUMBA:
        raise ImportError(f"{_ENV}=numba but numba is not installed")
    return choice


# ---------------------------------------------------------------------------
# numpy


def _fuzzy_sum_numpy(w, d):
    n_in = d.shape[0]
    flat = np.ascontiguousarray(d).reshape(n_in, -1)
    if not (w < 0).any():
        out = w @ flat
    else:
        swapped = np.ascontiguousarray(d[..., ::-1]).reshape(n_in, -1)
        out = np.maximum(w, 0.0) @ flat + np.minimum(w, 0.0) @ swapped
    return out.reshape((w.shape[0],) + d.shape[1:])


def _crisp_sum_numpy(w, x):
    return w @ x


# ---------------------------------------------------------------------------
# numba

if HAVE_NUMBA:

    @numba.njit(cache=True, fastmath=True)
    def _accumulate(w, x, out):
        """``out += w @ x`` with four output rows per pass over ``x``."""
        n_out, n_in = w.shape
        nq = x.shape[1]
        j = 0
        while j + 4 <= n_out:
            o0, o1, o2, o3 = out[j], out[j + 1], out[j + 2], out[j + 3]
            for k in range(n_in):
                g0, g1, g2, g3 = w[j, k], w[j + 1, k], w[j + 2, k], w[j + 3, k]
                if g0 == 0.0 and g1 == 0.0 and g2 == 0.0 and g3 == 0.0:
                    continue
                xk = x[k]
                for q in range(nq):
                    v = xk[q]
                    o0[q] += g0 * v
                    o1[q] += g1 * v
                    o2[q] += g2 * v
                    o3[q] += g3 * v
            j += 4
        while j < n_out:
            for k in range(n_in):
                g = w[j, k]
                if g != 0.0:
                    for q in range(nq):
                        out[j, q] += g * x[k, q]
            j += 1


def _fuzzy_sum_numba(w, d):
    n_in = d.shape[0]
    w = np.ascontiguousarray(w, dtype=np.float64)
    flat = np.ascontiguousarray(d, dtype=np.float64).reshape(n_in, -1)
    out = np.zeros((w.shape[0], flat.shape[1]))
    if not (w < 0).any():
        _accumulate(w, flat, out)
    else:
        swapped = np.ascontiguousarray(d[..., ::-1], dtype=np.float64).reshape(n_in, -1)
        _accumulate(np.maximum(w, 0.0), flat, out)
        _accumulate(np.minimum(w, 0.0), swapped, out)
    return out.reshape((w.shape[0],) + d.shape[1:])


def _crisp_sum_numba(w, x):
    n_in = x.shape[0]
    flat = np.ascontiguousarray(x, dtype=np.float64).reshape(n_in, -1)
    out = np.zeros((w.shape[0], flat.shape[1]))
    _accumulate(np.ascontiguousarray(w, dtype=np.float64), flat, out)
    return out.reshape((w.shape[0],) + x.shape[1:])


_IMPL = {
    "numpy": (_fuzzy_sum_numpy, _crisp_sum_numpy),
    "numba": (_fuzzy_sum_numba, _crisp_sum_numba),
}


def fuzzy_weighted_sum(w: np.ndarray, d: np.ndarray, backend: str | None = None) -> np.ndarray:
    """``out[j] = sum_k w[j, k] (.) d[k]`` with levelwise scalar multiplication.

    ``d`` has shape ``(n_in, ..., L, 2)``; negative weights swap the endpoints
    of the cut they multiply.
    """
    if w.shape[1] != d.shape[0]:
        raise ValueError(f"weights {w.shape} do not match {d.shape[0]} summands")
    if not w.any():
        return np.zeros((w.shape[0],) + d.shape[1:])
    return _IMPL[backend or default_backend()][0](w, d)


def crisp_weighted_sum(w: np.ndarray, x: np.ndarray, backend: str | None = None) -> np.ndarray:
    if w.shape[1] != x.shape[0]:
        raise ValueError(f"weights {w.shape} do not match {x.shape[0]} summands")
    if not w.any():
        return np.zeros((w.shape[0],) + x.shape[1:])
    return _IMPL[backend or default_backend()][1](w, x)
