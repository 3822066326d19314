"""Monte Carlo solvers for the incompressible Navier-Stokes equations."""

from ._nsmc import (
    AprioriParams,
    Backend,
    ConfigError,
    NsmcError,
    PeriodicCube,
    PicardConfig,
    PoissonConfig,
    ScalarField,
    VectorField,
    WholeSpace,
    beltrami,
    calderon_zygmund_check,
    constant_scalar,
    constant_vector,
    cosine_mode,
    existence_horizon,
    gaussian_bump,
    grad_pressure_mc,
    parse_config,
    picard_run,
    pressure_mc,
    run,
    set_thread_count,
    solve_bound_odes,
    solve_parabolic,
    taylor_green,
    thread_count,
    zero_scalar,
    zero_vector,
)

__version__ = "0.1.0"
