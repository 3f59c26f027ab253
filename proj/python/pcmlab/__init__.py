"""Python bindings for the pcmlab C++ core."""

from ._core import (
    LatticeSpec,
    NumericalError,
    ValidationError,
    build_lattice,
    leading_moment,
    mc_moment,
    propagator,
    run_campaign,
    sample_haar,
    sample_t,
    solve_gap,
    t0_closed_form,
    t0_prime,
    t_of_random_field,
    variance_prediction,
    verify_rotation,
)

__all__ = [
    "LatticeSpec",
    "NumericalError",
    "ValidationError",
    "build_lattice",
    "leading_moment",
    "mc_moment",
    "propagator",
    "run_campaign",
    "sample_haar",
    "sample_t",
    "solve_gap",
    "t0_closed_form",
    "t0_prime",
    "t_of_random_field",
    "variance_prediction",
    "verify_rotation",
]
