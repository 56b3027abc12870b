import numpy as np
import pytest

from fuzzyvolterra.stochastic_paths import (
    GridError,
    SeedSpec,
    make_grid,
    sample_brownian_pair,
    sample_increments,
)


def test_grid_counts():
    g = make_grid(0.5, 1.0, 0.25)
    assert (g.n_pre, g.n_main) == (2, 4)
    assert g.times().tolist() == [-0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0]
    assert g.node_of(0.0) == 2


def test_grid_without_delay():
    g = make_grid(0, 1.0, 0.5)
    assert g.n_pre == 0 and g.n_main == 2


@pytest.mark.parametrize("args", [(0.3, 1.0, 0.25), (0.25, 1.1, 0.25), (0.25, 1.0, 0.0), (-0.25, 1.0, 0.25),
                                  (0.25, 0.0, 0.25), (np.nan, 1.0, 0.25)])
def test_grid_errors(args):
    with pytest.raises(GridError):
        make_grid(*args)


def test_grid_tolerates_float_noise():
    g = make_grid(0.1 * 3, 1.0, 0.1)
    assert g.n_pre == 3 and g.n_main == 10


def test_node_of_rejects_off_grid():
    with pytest.raises(GridError):
        make_grid(0.5, 1.0, 0.25).node_of(0.3)


def test_perfect_correlation():
    b = sample_brownian_pair(make_grid(0, 1, 0.01), 1.0, SeedSpec(3))
    assert np.array_equal(b.b1, b.b2)
    assert b.b1[0] == 0.0 and b.b2[0] == 0.0


def test_rho_out_of_range():
    with pytest.raises(ValueError):
        sample_brownian_pair(make_grid(0, 1, 0.01), 1.5, SeedSpec(3))


def test_bad_seed():
    with pytest.raises(ValueError):
        SeedSpec(-1)
    with pytest.raises(ValueError):
        SeedSpec(2 ** 64)


def test_reproducible():
    g = make_grid(0.25, 1, 1 / 64)
    a = sample_brownian_pair(g, 0.3, SeedSpec(11, 5))
    b = sample_brownian_pair(g, 0.3, SeedSpec(11, 5))
    c = sample_brownian_pair(g, 0.3, SeedSpec(11, 6))
    assert np.array_equal(a.b1, b.b1) and np.array_equal(a.b2, b.b2)
    assert not np.array_equal(a.b1, c.b1)


def test_batch_matches_single_paths():
    g = make_grid(0, 1, 1 / 32)
    d1, d2 = sample_increments(g, -0.4, 9, [0, 7, 2])
    for p, sid in enumerate([0, 7, 2]):
        b = sample_brownian_pair(g, -0.4, SeedSpec(9, sid))
        assert np.array_equal(d1[:, p], b.db1)
        assert np.array_equal(d2[:, p], b.db2)


@pytest.fixture(scope="module")
def big_sample():
    g = make_grid(0, 1, 0.01)
    n = 100_000
    d1, d2 = sample_increments(g, 0.0, 2024, range(n))
    return g, d1, d2


def test_independent_terminal_values(big_sample):
    _, d1, d2 = big_sample
    r = np.corrcoef(d1.sum(axis=0), d2.sum(axis=0))[0, 1]
    assert abs(r) < 0.02


def test_terminal_variance(big_sample):
    _, d1, _ = big_sample
    assert abs(d1.sum(axis=0).var() - 1.0) < 0.02


def test_increment_scaling(big_sample):
    g, d1, _ = big_sample
    n = d1.shape[1]
    for k in (1, 10, 50):
        x = d1[:k].sum(axis=0)
        var, target = x.var(ddof=1), k * g.dt
        # sd of the sample variance of a normal is target * sqrt(2 / (n - 1))
        assert abs(var - target) < 5 * target * np.sqrt(2 / (n - 1))


def test_substreams_uncorrelated(big_sample):
    _, d1, _ = big_sample
    b = d1.sum(axis=0)
    r = np.corrcoef(b[:-1], b[1:])[0, 1]
    assert abs(r) < 3 / np.sqrt(b.size)


def test_correlated_pair():
    g = make_grid(0, 1, 0.05)
    d1, d2 = sample_increments(g, 0.6, 1, range(20_000))
    r = np.corrcoef(d1.ravel(), d2.ravel())[0, 1]
    assert abs(r - 0.6) < 0.01
