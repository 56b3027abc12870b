"""Named families of kernels, coefficients and initial maps.

Every family knows its Lipschitz constant and linear-growth constant in the
squared form the existence theory uses::

    d(K(U1, V1), K(U2, V2))**2 <= C_lip * (d(U1, U2)**2 + d(V1, V2)**2)
    ||K(U, V)||**2             <= C_grow * (1 + ||U||**2 + ||V||**2)

For ``a*u + c*v + b`` both follow from Cauchy-Schwarz:
``C_lip = a**2 + c**2`` and ``C_grow = a**2 + c**2 + ||b||**2``.
Families serialize to ``{"family": name, **params}`` and are rebuilt by
:func:`build`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Optional

import numpy as np

from .fuzzy_core import AlphaGrid, FuzzyNumber, center_cuts, embed, norm_F, scale_cuts, triangular
from .integrals import Diffusion, Drift, Kernel


class RegistryError(KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


def _params(obj) -> Dict[str, Any]:
    out = {}
    for f in fields(obj):
        if f.metadata.get("internal"):
            continue
        val = getattr(obj, f.name)
        if hasattr(val, "to_config"):
            val = val.to_config()
        out[f.name] = val
    return out


class _Named:
    family = ""

    def to_config(self) -> Dict[str, Any]:
        return {"family": self.family, **_params(self)}


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class ZeroKernel(_Named, Kernel):
    family = "zero"

    def __call__(self, t, s):
        return np.zeros(np.broadcast_shapes(np.shape(t), np.shape(s)))

    def sup_norm(self, horizon):
        return 0.0


@dataclass(frozen=True)
class ConstantKernel(_Named, Kernel):
    family = "constant"
    value: float = 1.0

    def __call__(self, t, s):
        return np.full(np.broadcast_shapes(np.shape(t), np.shape(s)), float(self.value))

    def sup_norm(self, horizon):
        return abs(float(self.value))


@dataclass(frozen=True)
class ExpKernel(_Named, Kernel):
    """``value * exp(-rate * (t - s))``."""

    family = "exp-kernel"
    value: float = 1.0
    rate: float = 1.0

    def __call__(self, t, s):
        return self.value * np.exp(-self.rate * (np.asarray(t) - np.asarray(s)))

    def sup_norm(self, horizon):
        return abs(self.value) * max(1.0, math.exp(-self.rate * horizon))


@dataclass(frozen=True)
class PolyKernel(_Named, Kernel):
    """``value * (1 + slope * (t - s)) ** power`` with ``slope >= 0``."""

    family = "poly-kernel"
    value: float = 1.0
    slope: float = 1.0
    power: int = 1

    def __post_init__(self):
        if self.slope < 0 or self.power < 0 or int(self.power) != self.power:
            raise ValueError("poly-kernel needs slope >= 0 and a non-negative integer power")

    def __call__(self, t, s):
        return self.value * (1.0 + self.slope * (np.asarray(t) - np.asarray(s))) ** int(self.power)

    def sup_norm(self, horizon):
        return abs(self.value) * (1.0 + self.slope * horizon) ** int(self.power)


@dataclass(frozen=True)
class ScaledKernel(_Named, Kernel):
    family = "scaled"
    base: Kernel = field(default_factory=ZeroKernel)
    factor: float = 1.0

    def __call__(self, t, s):
        return self.factor * self.base(t, s)

    def sup_norm(self, horizon):
        return abs(self.factor) * self.base.sup_norm(horizon)


# ---------------------------------------------------------------------------
# drifts


def _bias_cuts(bias) -> np.ndarray:
    return bias.cuts if isinstance(bias, FuzzyNumber) else np.asarray(float(bias))


def _bias_norm(bias) -> float:
    return norm_F(bias) if isinstance(bias, FuzzyNumber) else abs(float(bias))


def _bias_config(bias):
    if isinstance(bias, FuzzyNumber):
        lo, hi = bias.support.lo, bias.support.hi
        core = bias.core
        if core.lo != core.hi:
            raise ValueError("only triangular biases serialize")
        return {"left": core.lo - lo, "peak": core.lo, "right": hi - core.lo}
    return float(bias)


class _Coefficient(_Named):
    def lipschitz_constant(self) -> float:
        raise NotImplementedError

    def growth_constant(self) -> float:
        raise NotImplementedError

    def to_config(self):
        cfg = super().to_config()
        if "bias" in cfg:
            cfg["bias"] = _bias_config(self.bias)
        return cfg


@dataclass(frozen=True)
class ZeroDrift(_Coefficient, Drift):
    family = "zero"

    def apply(self, u, v):
        return np.zeros(np.broadcast_shapes(u.shape, v.shape))

    def lipschitz_constant(self):
        return 0.0

    def growth_constant(self):
        return 0.0


@dataclass(frozen=True)
class LinearDrift(_Coefficient, Drift):
    """``a (.) u  +  c (.) v  +  bias`` with a crisp or fuzzy ``bias``."""

    family = "linear"
    a: float = 0.0
    c: float = 0.0
    bias: Any = 0.0

    def apply(self, u, v):
        out = np.zeros(np.broadcast_shapes(u.shape, v.shape))
        if self.a:
            out = out + scale_cuts(self.a, u)
        if self.c:
            out = out + scale_cuts(self.c, v)
        return out + _bias_cuts(self.bias)

    def lipschitz_constant(self):
        return self.a ** 2 + self.c ** 2

    def growth_constant(self):
        return self.a ** 2 + self.c ** 2 + _bias_norm(self.bias) ** 2


@dataclass(frozen=True)
class SineShiftDrift(_Coefficient, Drift):
    """``a (.) u  +  <amplitude * sin(center(v))>``; Lipschitz but nonlinear."""

    family = "sine-shift"
    a: float = 0.0
    amplitude: float = 1.0

    def apply(self, u, v):
        shift = self.amplitude * np.sin(center_cuts(v))
        return scale_cuts(self.a, u) + shift[..., None, None]

    def lipschitz_constant(self):
        return self.a ** 2 + self.amplitude ** 2

    def growth_constant(self):
        return self.a ** 2 + self.amplitude ** 2


@dataclass(frozen=True)
class ScaledShiftDrift(_Coefficient, Drift):
    """``factor (.) base(u, v)  +  <shift>``."""

    family = "scaled-shift"
    base: Drift = field(default_factory=ZeroDrift)
    factor: float = 1.0
    shift: float = 0.0

    def apply(self, u, v):
        return scale_cuts(self.factor, self.base.apply(u, v)) + self.shift

    def lipschitz_constant(self):
        return self.factor ** 2 * self.base.lipschitz_constant()

    def growth_constant(self):
        return (abs(self.factor) * math.sqrt(self.base.growth_constant()) + abs(self.shift)) ** 2


# ---------------------------------------------------------------------------
# diffusions


@dataclass(frozen=True)
class ZeroDiffusion(_Coefficient, Diffusion):
    family = "zero"

    def apply(self, u, v):
        return np.zeros(np.broadcast_shapes(u.shape, v.shape)[:-2])

    def lipschitz_constant(self):
        return 0.0

    def growth_constant(self):
        return 0.0


@dataclass(frozen=True)
class LinearCenterDiffusion(_Coefficient, Diffusion):
    """``a * center(u) + c * center(v) + b`` where center is the core midpoint."""

    family = "linear-center"
    a: float = 0.0
    c: float = 0.0
    b: float = 0.0

    def apply(self, u, v):
        return self.a * center_cuts(u) + self.c * center_cuts(v) + self.b

    def lipschitz_constant(self):
        return self.a ** 2 + self.c ** 2

    def growth_constant(self):
        return self.a ** 2 + self.c ** 2 + self.b ** 2


@dataclass(frozen=True)
class SineCenterDiffusion(_Coefficient, Diffusion):
    family = "sine-center"
    sigma: float = 1.0

    def apply(self, u, v):
        return self.sigma * np.sin(center_cuts(u))

    def lipschitz_constant(self):
        return self.sigma ** 2

    def growth_constant(self):
        return self.sigma ** 2


# ---------------------------------------------------------------------------
# initial maps


@dataclass(frozen=True)
class TriangularInitial(_Named):
    """``Phi(t)`` triangular with peak ``center + slope * t`` and fixed spreads.

    Spreads of zero give a crisp initial map.
    """

    family = "triangular"
    alpha: AlphaGrid = field(default_factory=AlphaGrid.uniform, metadata={"internal": True})
    center: float = 0.0
    slope: float = 0.0
    left: float = 0.0
    right: float = 0.0

    def __post_init__(self):
        if self.left < 0 or self.right < 0:
            raise ValueError("spreads must be non-negative")

    def __call__(self, t: float) -> FuzzyNumber:
        p = self.center + self.slope * t
        if self.left == 0 and self.right == 0:
            return embed(p, self.alpha)
        return triangular(p - self.left, p, p + self.right, self.alpha)


@dataclass(frozen=True)
class ShiftedInitial(_Named):
    """``base(t) + <shift>``."""

    family = "shifted"
    base: Any = None
    shift: float = 0.0

    @property
    def alpha(self):
        return self.base.alpha

    def __call__(self, t: float) -> FuzzyNumber:
        u = self.base(t)
        return FuzzyNumber._raw(u.grid, u.cuts + self.shift)


# ---------------------------------------------------------------------------
# registry

KERNELS = {c.family: c for c in (ZeroKernel, ConstantKernel, ExpKernel, PolyKernel, ScaledKernel)}
DRIFTS = {
    "zero": ZeroDrift,
    "constant": LinearDrift,
    "linear": LinearDrift,
    "linear-in-first-arg": LinearDrift,
    "linear-in-delayed-arg": LinearDrift,
    "sine-shift": SineShiftDrift,
    "scaled-shift": ScaledShiftDrift,
}
_DRIFT_ALLOWED = {
    "constant": {"bias"},
    "linear-in-first-arg": {"a", "bias"},
    "linear-in-delayed-arg": {"c", "bias"},
}
DIFFUSIONS = {c.family: c for c in (ZeroDiffusion, LinearCenterDiffusion, SineCenterDiffusion)}
INITIALS = {c.family: c for c in (TriangularInitial, ShiftedInitial)}

KINDS = {"kernel": KERNELS, "drift": DRIFTS, "diffusion": DIFFUSIONS, "initial": INITIALS}


def _fuzzy_bias(val, alpha: AlphaGrid):
    if isinstance(val, dict):
        extra = set(val) - {"left", "peak", "right"}
        if extra:
            raise RegistryError(f"unknown bias keys {sorted(extra)}")
        peak = float(val.get("peak", 0.0))
        return triangular(peak - float(val.get("left", 0.0)), peak, peak + float(val.get("right", 0.0)), alpha)
    return float(val)


def build(kind: str, cfg: Dict[str, Any], alpha: Optional[AlphaGrid] = None):
    """Construct a registry object from ``{"family": name, **params}``."""
    table = KINDS[kind]
    if not isinstance(cfg, dict) or "family" not in cfg:
        raise RegistryError(f"{kind} entry needs a 'family' key; available: {sorted(table)}")
    name = cfg["family"]
    if name not in table:
        raise RegistryError(f"unknown {kind} family {name!r}; available: {sorted(table)}")
    cls = table[name]
    params = {k: v for k, v in cfg.items() if k != "family"}
    allowed = {f.name for f in fields(cls) if not f.metadata.get("internal")}
    if kind == "drift" and name in _DRIFT_ALLOWED:
        allowed = _DRIFT_ALLOWED[name]
    unknown = set(params) - allowed
    if unknown:
        raise RegistryError(f"{kind} family {name!r} has no parameter(s) {sorted(unknown)}; expected {sorted(allowed)}")
    for key in ("base",):
        if key in params:
            params[key] = build(kind, params[key], alpha)
    if "bias" in params:
        params["bias"] = _fuzzy_bias(params["bias"], alpha or AlphaGrid.uniform())
    if kind == "initial" and name == "triangular":
        params["alpha"] = alpha or AlphaGrid.uniform()
    obj = cls(**params)
    if kind == "drift" and name != cls.family:
        # keep the alias so configs round-trip under the name they were written with
        object.__setattr__(obj, "_alias", name)
    return obj


def config_of(obj) -> Dict[str, Any]:
    cfg = obj.to_config()
    alias = getattr(obj, "_alias", None)
    if alias:
        cfg["family"] = alias
        cfg = {k: v for k, v in cfg.items() if k == "family" or k in _DRIFT_ALLOWED[alias]}
    for k, v in list(cfg.items()):
        if isinstance(v, _Named):
            cfg[k] = config_of(v)
    return cfg


def problem_constant(*coefficients) -> float:
    """Largest Lipschitz or growth constant over the given coefficients."""
    return max(max(c.lipschitz_constant(), c.growth_constant()) for c in coefficients)
