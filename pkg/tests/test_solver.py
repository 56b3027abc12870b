import dataclasses
import math

import numpy as np
import pytest

from fuzzyvolterra import coefficients as co
from fuzzyvolterra import fuzzy_core as fc
from fuzzyvolterra.fuzzy_core import HukuharaError
from fuzzyvolterra.integrals import FuzzyPath
from fuzzyvolterra.solver import (
    BoundConstants,
    ConfigurationError,
    StoppingRule,
    bound_constants,
    check_cz_bound,
    estimate_constant,
    moment_envelope,
    picard_step,
    solve_ensemble,
    solve_path,
)
from fuzzyvolterra.stochastic_paths import SeedSpec, sample_brownian_pair

from problems import ALPHA, crisp_delayed, crisp_linear, fuzzy_problem, hukuhara_failure, zero_problem

ONE = co.ConstantKernel(1.0)


def pair(spec, stream=0, seed=1):
    return sample_brownian_pair(spec.grid, spec.rho, SeedSpec(seed, stream))


def sup_dinf(a, b):
    return float(np.max(fc.dinf_cuts(a.values, b.values)))


# ---------------------------------------------------------------------------
# single steps


def test_identity_case():
    spec = zero_problem()
    phi = spec.initial_path()
    out = picard_step(phi, spec, pair(spec))
    assert np.array_equal(out.values, phi.values)


def test_symmetric_cancellation():
    K = co.LinearDrift(a=0.4, c=0.3, bias=0.1)
    L = co.LinearCenterDiffusion(a=0.5, b=0.2)
    g = co.ExpKernel(1.0, 0.5)
    spec = dataclasses.replace(fuzzy_problem(dt=1 / 64), rho=1.0, g1=g, g2=g, K1=K, K2=K,
                               h1=ONE, h2=ONE, L1=L, L2=L)
    phi = spec.initial_path()
    prev = FuzzyPath(phi.grid, phi.alpha, phi.values + np.linspace(0, 1, phi.values.shape[0])[:, None, None])
    out = picard_step(prev, spec, pair(spec))
    # (Phi + I) - I is exact up to one rounding per endpoint
    assert np.max(np.abs(out.values - phi.values)) <= 1e-14


def _scalar_step(spec, x, db1, db2):
    """Crisp Picard step written out term by term."""
    g = spec.grid
    lag = g.n_pre
    tm = g.main_times()
    phi = np.array([spec.phi(float(t)).cuts[-1, 0] for t in g.times()])

    def emb(val):
        return np.full((ALPHA.size, 2), val)

    out = phi.copy()
    for j in range(1, g.n_main + 1):
        acc = phi[lag + j]
        for k in range(j):
            u, v = emb(x[lag + k]), emb(x[k])
            s = tm[k]
            acc += float(spec.g2(tm[j], s)) * g.dt * spec.K2.apply(u, v)[-1, 0]
            acc -= float(spec.g1(tm[j], s)) * g.dt * spec.K1.apply(u, v)[-1, 0]
            acc += float(spec.h2(tm[j], s)) * float(spec.L2.apply(u, v)) * db2[k]
            acc -= float(spec.h1(tm[j], s)) * float(spec.L1.apply(u, v)) * db1[k]
        out[lag + j] = acc
    return out


def test_crisp_step_matches_scalar_step():
    spec = dataclasses.replace(crisp_delayed(dt=1 / 32), rho=0.3,
                               g1=co.ConstantKernel(0.5), K1=co.LinearDrift(a=0.3, bias=0.2),
                               h1=co.ExpKernel(0.4, 1.0), L1=co.LinearCenterDiffusion(c=0.6))
    b = pair(spec)
    prev = spec.initial_path()
    for _ in range(3):
        out = picard_step(prev, spec, b)
        ref = _scalar_step(spec, prev.values[:, -1, 0], b.db1, b.db2)
        assert out.is_crisp()
        assert np.max(np.abs(out.values - ref[:, None, None])) <= 1e-12
        prev = out


def test_hukuhara_failure_first_main_node():
    spec = hukuhara_failure()
    with pytest.raises(HukuharaError) as err:
        picard_step(spec.initial_path(), spec, pair(spec))
    assert err.value.node == spec.grid.n_pre + 1
    assert err.value.level == 0
    assert err.value.deficit == pytest.approx(spec.dt)


# ---------------------------------------------------------------------------
# full solves


def test_zero_problem_one_iteration():
    spec = zero_problem()
    rep = solve_path(spec, pair(spec))
    assert rep.succ_diff == [0.0] and rep.n_iters == 1 and rep.converged
    assert np.array_equal(rep.solution.values, spec.initial_path().values)


def test_crisp_linear_picard_error():
    spec = crisp_linear(dt=1 / 64)
    rep = solve_path(spec, pair(spec), StoppingRule(1e-14, 60), keep_iterates=True)
    assert rep.converged
    g = spec.grid
    t = g.main_times()
    fixed = rep.solution.values[g.n_pre:, -1, 0]
    # the discrete fixed point is (1 + dt)^j, which tends to e^t
    assert np.allclose(fixed, (1 + spec.dt) ** np.arange(t.size), rtol=1e-12)
    for n, it in enumerate(rep.iterates_kept):
        err = np.abs(it.values[g.n_pre:, -1, 0] - fixed)
        assert np.all(err <= t ** n / math.factorial(n) * np.exp(t) + 1e-12)


def test_crisp_linear_tends_to_exp():
    errs = []
    for dt in (1 / 32, 1 / 128):
        spec = crisp_linear(dt=dt)
        rep = solve_path(spec, pair(spec), StoppingRule(1e-13, 80))
        errs.append(abs(rep.solution.values[-1, -1, 0] - math.e))
    assert errs[1] < errs[0] / 3


def test_pre_segment_pinned():
    spec = fuzzy_problem(dt=1 / 64)
    phi = spec.initial_path().values
    rep = solve_path(spec, pair(spec), keep_iterates=True)
    n = spec.grid.n_pre
    for it in rep.iterates_kept + [rep.solution]:
        assert np.array_equal(it.values[:n + 1], phi[:n + 1])


def test_solve_reports_failure():
    spec = hukuhara_failure()
    rep = solve_path(spec, pair(spec))
    assert rep.status == "hukuhara-failure" and not rep.converged
    f = rep.hukuhara_failures[0]
    assert (f.iteration, f.node, f.kind) == (1, spec.grid.n_pre + 1, "width")


def test_max_iters():
    spec = fuzzy_problem(dt=1 / 64)
    rep = solve_path(spec, pair(spec), StoppingRule(1e-30, 3))
    assert rep.status == "max-iters" and rep.n_iters == 3 and len(rep.succ_diff) == 3


def test_uniqueness_from_shifted_start():
    spec = fuzzy_problem(dt=1 / 64)
    b = pair(spec, stream=4)
    stop = StoppingRule(1e-10, 60)
    phi = spec.initial_path()
    shifted = phi.values.copy()
    shifted[spec.grid.n_pre + 1:] += 1.0
    a = solve_path(spec, b, stop)
    c = solve_path(spec, b, stop, initial=FuzzyPath(phi.grid, phi.alpha, shifted))
    assert a.converged and c.converged
    assert sup_dinf(a.solution, c.solution) < 10 * stop.tol


def test_fixed_point_consistency():
    spec = fuzzy_problem(dt=1 / 64)
    b = pair(spec, stream=2)
    rep = solve_path(spec, b)
    again = picard_step(rep.solution, spec, b)
    assert sup_dinf(again, rep.solution) < rep.succ_diff[-1] + 1e-15 < 1e-8


def test_crisp_closure():
    spec = crisp_delayed(dt=1 / 64)
    rep = solve_path(spec, pair(spec), keep_iterates=True)
    assert all(it.is_crisp() for it in rep.iterates_kept)


def test_solutions_are_fuzzy_numbers():
    spec = fuzzy_problem(dt=1 / 64)
    rep = solve_path(spec, pair(spec))
    assert rep.solution.first_violation() is None


def test_backends_agree():
    spec = fuzzy_problem(dt=1 / 64)
    b = pair(spec)
    x = solve_path(spec, b, backend="numpy").solution.values
    y = solve_path(spec, b, backend="numba").solution.values
    assert np.max(np.abs(x - y)) < 1e-12


def test_ensemble_matches_single_paths():
    spec = fuzzy_problem(dt=1 / 64)
    ens = solve_ensemble(spec, 4, seed=3, n_iters=6)
    for p in range(4):
        b = sample_brownian_pair(spec.grid, spec.rho, SeedSpec(3, p))
        single = solve_path(spec, b, StoppingRule(0.0, 6))
        assert np.max(np.abs(ens.solution(p).values - single.solution.values)) < 1e-12


def test_ensemble_excludes_failed_paths():
    ens = solve_ensemble(hukuhara_failure(), 3, seed=0)
    assert ens.n_paths == 0 and len(ens.failures) == 3
    assert np.isnan(ens.sq_sup_diff).all()


# ---------------------------------------------------------------------------
# constants


def _unit(C, phi_center=0.0):
    return dataclasses.replace(zero_problem(), horizon=1.0, g1=ONE, g2=ONE, h1=ONE, h2=ONE, lipschitz_C=C,
                               phi=co.TriangularInitial(alpha=ALPHA, center=phi_center))


def test_zeta_plug_in():
    assert bound_constants(_unit(1.0)).zeta == 40.0


def test_zeta_zero_kernels():
    b = bound_constants(zero_problem())
    assert b.zeta == 0.0 and b.cz_bound(2, 1.0) == 0.0


def test_xi_plug_in():
    assert bound_constants(_unit(1.0)).xi == 40.0
    assert bound_constants(_unit(1.0, phi_center=2.0)).xi == 40.0 * 9


def test_missing_constant():
    spec = dataclasses.replace(zero_problem(), lipschitz_C=None)
    with pytest.raises(ConfigurationError):
        bound_constants(spec, estimate=False)
    assert bound_constants(spec).C == pytest.approx(estimate_constant(spec))


def test_estimated_constant_is_conservative():
    spec = fuzzy_problem()
    c_hat = estimate_constant(spec)
    declared = co.problem_constant(spec.K1, spec.K2, spec.L1, spec.L2)
    assert declared * 0.9 <= c_hat / 1.5 <= declared


def test_factorial_bound_values():
    b = BoundConstants(xi=6.0, zeta=2.0, C=1.0)
    assert b.cz_bound(1, 1.0) == pytest.approx(6.0)
    assert b.cz_bound(3, 0.5) == pytest.approx(1.5 * 2.0 ** 3 / 6)


def test_bound_check_zero_problem():
    spec = zero_problem()
    rows = check_cz_bound(solve_ensemble(spec, 100, seed=0), bound_constants(spec))
    assert all(r.passed and r.estimate == 0 for r in rows)


def test_bound_check_needs_paths():
    spec = zero_problem()
    with pytest.raises(ValueError):
        check_cz_bound(solve_ensemble(spec, 10, seed=0), bound_constants(spec))


def test_moment_envelope_zero_kernels():
    env = moment_envelope(zero_problem())
    assert env.M4 == 0.0
    assert env.value(1.0) == 5 * zero_problem().phi_sup_norm_sq()


def test_invalid_initial_map():
    bad = dataclasses.replace(zero_problem(), phi=lambda t: fc.FuzzyNumber._raw(ALPHA, np.tile([1.0, 0.0], (11, 1))))
    with pytest.raises(ConfigurationError):
        bad.initial_path()
