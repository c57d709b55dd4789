"""Ensemble state tracking for linear systems via optimal transport."""
__version__ = "0.1.0"

from .errors import EnsembleOTError
from .lti_systems import (
    FeedbackLaw,
    LinearSystem,
    PiecewiseConstant,
    controllability_gramian,
    expected_min_energy_gaussian,
    min_energy_control,
    min_energy_cost,
    observability_gramian,
    state_transition,
)
from .measures import DiscreteMeasure, GaussianMeasure, Grid, grid_discretize, pushforward_linear
from .transport import lqr_cost_matrix, solve_kantorovich, transformed_w2, transport_simplex, wasserstein_p
from .gaussian_tracking import gaussian_interpolant, riccati_solve, track_gaussian
from .discrete_tracking import TrackingProblem, displacement_interpolate, solve_tracking
from .observability import ensemble_observable_lti, kernel_intersection_time, unobservable_counterexample
from .ctrl_measure import controllability_measure, reach_cdf

__all__ = [
    "EnsembleOTError",
    "FeedbackLaw",
    "LinearSystem",
    "PiecewiseConstant",
    "controllability_gramian",
    "expected_min_energy_gaussian",
    "min_energy_control",
    "min_energy_cost",
    "observability_gramian",
    "state_transition",
    "DiscreteMeasure",
    "GaussianMeasure",
    "Grid",
    "grid_discretize",
    "pushforward_linear",
    "lqr_cost_matrix",
    "solve_kantorovich",
    "transformed_w2",
    "transport_simplex",
    "wasserstein_p",
    "gaussian_interpolant",
    "riccati_solve",
    "track_gaussian",
    "TrackingProblem",
    "displacement_interpolate",
    "solve_tracking",
    "ensemble_observable_lti",
    "kernel_intersection_time",
    "unobservable_counterexample",
    "controllability_measure",
    "reach_cdf",
]
