"""Kernel MMD distributionally robust chance-constrained programs."""

from ._core import (
    CapacityError,
    ConfigError,
    ConstraintModel,
    DegenerateSampleError,
    NumericalError,
    UnsupportedModelError,
    bootstrap_radius,
    box,
    cli_eval,
    cli_radius,
    cli_reproduce_portfolio,
    cli_solve,
    empirical_cvar,
    empirical_var,
    evaluate_solution,
    gram,
    guarantee_bound,
    median_heuristic,
    mmd_sq_biased,
    rate_radius,
    sample_gaussian,
    simplex,
    solve_cvar,
    solve_mip,
    solve_tractable,
)

__version__ = "0.1.0"
