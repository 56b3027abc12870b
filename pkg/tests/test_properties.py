from fuzzyvolterra.properties import (
    ALGEBRA,
    algebra_suite,
    check_closure,
    check_metric_axioms,
    hausdorff_oracle_check,
    hausdorff_sampled,
)

import numpy as np
import pytest


def test_small_suite_passes():
    res = algebra_suite(n=500, seed=3)
    assert [r.name for r in res] == list(ALGEBRA)
    assert all(r.ok for r in res)
    assert all(r.cases >= 800 for r in res)


@pytest.mark.parametrize("dyadic", [False, True])
def test_metric_axioms_and_closure(dyadic):
    rng = np.random.default_rng(0)
    assert check_metric_axioms(rng, 2000, 11, dyadic).ok
    assert check_closure(rng, 2000, 11, dyadic).ok


def test_sampled_hausdorff():
    assert hausdorff_sampled((0, 1), (2, 5)) == 4
    assert hausdorff_sampled((0, 10), (4, 5)) == 5
    assert hausdorff_sampled((3, 3), (3, 3)) == 0


def test_hausdorff_check_small():
    assert hausdorff_oracle_check(pairs=50, seed=1).ok
