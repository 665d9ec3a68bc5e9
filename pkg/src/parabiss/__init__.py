"""Monotone finite-difference solver for parabolic boundary-control systems,
with tools for comparison principles and input-to-state stability checks."""

__version__ = "0.1.0"

from .axioms import AxiomReport, axiom_suite
from .comparison import GainFit, KLFit, eval_beta, fit_exp_kl, fit_gain
from .grid import Grid, ScalarField, cutoff_blend, field_from_csv, field_to_csv, leq, lp_norm, make_grid
from .heat import (
    analytic_heat_solution,
    corollary1_experiment,
    dirichlet_eigenvalues,
    lift_constant,
    spectral_margin,
    steady_state_constant_boundary,
)
from .iss import (
    constant_input_gain_sweep,
    equivalence_experiment,
    reduction_experiment,
    verify_estimate,
)
from .monotone import compare_runs, monotone_system_test, ode_reduction_demo, sandwich_states
from .presets import PRESETS, build_spec, list_presets
from .signals import (
    BoundarySignal,
    ConstantInput,
    PiecewiseConstantSignal,
    SinusoidSignal,
    TabulatedSignal,
)
from .solver import (
    NonlinearitySpec,
    Trajectory,
    assemble,
    fisher_spec,
    heat_spec,
    logistic_advection_spec,
    simulate_boundary,
    simulate_distributed,
    step,
    transform_check,
)
