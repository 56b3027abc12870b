"""Fuzzy stochastic Volterra equations with constant delay: arithmetic, quadrature, Picard solver."""

from .fuzzy_core import (
    AlphaGrid,
    FuzzyNumber,
    GridMismatchError,
    HukuharaError,
    Interval,
    add,
    d_inf,
    embed,
    hausdorff,
    hukuhara_sub,
    norm_F,
    scalar_mul,
    trapezoidal,
    triangular,
    validate,
)
from .integrals import FuzzyPath, aumann_integral, ito_integral
from .solver import (
    BoundConstants,
    ConfigurationError,
    PathEnsembleReport,
    ProblemSpec,
    SolveReport,
    StoppingRule,
    bound_constants,
    check_cz_bound,
    picard_step,
    solve_ensemble,
    solve_path,
)
from .stochastic_paths import BrownianPair, SeedSpec, TimeGrid, make_grid, sample_brownian_pair

__version__ = "0.1.0"
