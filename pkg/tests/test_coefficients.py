import numpy as np
import pytest

from fuzzyvolterra import coefficients as co
from fuzzyvolterra import fuzzy_core as fc
from fuzzyvolterra.fuzzy_core import AlphaGrid
from fuzzyvolterra.integrals import estimate_sup_norm

A = AlphaGrid.uniform(10)

DRIFTS = [
    co.LinearDrift(a=0.5, c=-0.25, bias=0.3),
    co.build("drift", {"family": "constant", "bias": {"left": 0.5, "peak": 1.0, "right": 0.25}}, A),
    co.SineShiftDrift(a=-0.7, amplitude=0.4),
    co.ScaledShiftDrift(base=co.LinearDrift(a=1.0, c=0.5), factor=-1.5, shift=0.2),
]
DIFFUSIONS = [
    co.LinearCenterDiffusion(a=0.3, c=-0.2, b=0.5),
    co.SineCenterDiffusion(sigma=0.8),
]


@pytest.fixture(scope="module")
def args():
    rng = np.random.default_rng(12)
    return [fc.random_cuts(rng, (5000,), A.size, scale=5.0) for _ in range(4)]


@pytest.mark.parametrize("coef", DRIFTS + DIFFUSIONS, ids=lambda c: c.family)
def test_declared_constants_hold(coef, args):
    u1, v1, u2, v2 = args
    a, b = coef.apply(u1, v1), coef.apply(u2, v2)
    if a.ndim > 1:
        dist, size = fc.dinf_cuts(a, b), fc.norm_cuts(a)
    else:
        dist, size = np.abs(a - b), np.abs(a)
    lip = dist ** 2 / (fc.dinf_cuts(u1, u2) ** 2 + fc.dinf_cuts(v1, v2) ** 2)
    grow = size ** 2 / (1 + fc.norm_cuts(u1) ** 2 + fc.norm_cuts(v1) ** 2)
    assert lip.max() <= coef.lipschitz_constant() * (1 + 1e-12)
    assert grow.max() <= coef.growth_constant() * (1 + 1e-12)


@pytest.mark.parametrize("drift", DRIFTS, ids=lambda c: c.family)
def test_drifts_return_fuzzy_numbers(drift, args):
    out = drift.apply(args[0], args[1])
    assert out.shape == args[0].shape
    assert all(fc.validate_cuts(x) is None for x in out[:200])


@pytest.mark.parametrize("kernel", [co.ConstantKernel(-2.0), co.ExpKernel(1.5, 0.7), co.ExpKernel(1.0, -0.5),
                                    co.PolyKernel(0.5, 2.0, 3), co.ScaledKernel(co.ExpKernel(1.0, 1.0), -3.0)],
                         ids=lambda k: k.family)
def test_sup_norms_match_sampling(kernel):
    assert kernel.sup_norm(1.0) == pytest.approx(estimate_sup_norm(kernel, 1.0), rel=1e-12)


def test_poly_kernel_validation():
    with pytest.raises(ValueError):
        co.PolyKernel(1.0, -1.0, 2)


@pytest.mark.parametrize("kind,cfg", [
    ("kernel", {"family": "exp-kernel", "value": 2.0, "rate": 0.5}),
    ("kernel", {"family": "scaled", "base": {"family": "constant", "value": 1.0}, "factor": 1.5}),
    ("drift", {"family": "linear-in-first-arg", "a": 0.5, "bias": 0.0}),
    ("drift", {"family": "linear-in-delayed-arg", "c": -1.0, "bias": {"left": 0.5, "peak": 0.0, "right": 1.0}}),
    ("drift", {"family": "scaled-shift", "base": {"family": "linear", "a": 1.0, "c": 0.0, "bias": 0.0},
               "factor": 1.0, "shift": 0.25}),
    ("diffusion", {"family": "linear-center", "a": 0.1, "c": 0.2, "b": 0.3}),
    ("initial", {"family": "triangular", "center": 1.0, "slope": 0.0, "left": 0.5, "right": 0.5}),
])
def test_registry_round_trip(kind, cfg):
    obj = co.build(kind, cfg, A)
    assert co.config_of(obj) == cfg
    assert co.config_of(co.build(kind, co.config_of(obj), A)) == cfg


def test_unknown_family_lists_choices():
    with pytest.raises(co.RegistryError) as err:
        co.build("kernel", {"family": "gX"})
    msg = str(err.value)
    assert "gX" in msg and "exp-kernel" in msg and "poly-kernel" in msg


def test_unknown_parameter():
    with pytest.raises(co.RegistryError) as err:
        co.build("drift", {"family": "linear-in-first-arg", "c": 1.0})
    assert "'c'" in str(err.value)


def test_aliases_restrict_arguments():
    d = co.build("drift", {"family": "linear-in-delayed-arg", "c": 2.0}, A)
    u = fc.triangular(0, 1, 2, A).cuts
    v = fc.triangular(5, 6, 7, A).cuts
    assert np.array_equal(d.apply(u, v), 2 * v)


def test_shifted_initial():
    base = co.TriangularInitial(alpha=A, center=1.0, slope=2.0, left=0.5, right=0.5)
    phi = co.ShiftedInitial(base=base, shift=0.25)
    assert np.array_equal(phi(0.5).cuts, base(0.5).cuts + 0.25)


def test_crisp_initial():
    phi = co.TriangularInitial(alpha=A, center=1.0, slope=-1.0)
    assert phi(0.25) == fc.embed(0.75, A)


def test_problem_constant():
    assert co.problem_constant(co.LinearDrift(a=0.5), co.LinearCenterDiffusion(b=2.0)) == 4.0
