"""Linearization, passivity checks and design optimization."""

from .design import (
    AffineFeedback,
    DesignProblem,
    DesignVariable,
    OpenLoop,
    ProportionalTracking,
    augment_design,
    evaluate_objective,
    simulate_design,
)
from .ga import OptimizationResult, genetic_search, optimize
from .linearize import LinearModel, linearize
from .passivity import (
    PassivityReport,
    PassivityTrace,
    edge_form,
    passivity_form_check,
    passivity_index,
    passivity_outputs,
)

__all__ = [
    "AffineFeedback",
    "DesignProblem",
    "DesignVariable",
    "LinearModel",
    "OpenLoop",
    "OptimizationResult",
    "PassivityReport",
    "PassivityTrace",
    "ProportionalTracking",
    "augment_design",
    "edge_form",
    "evaluate_objective",
    "genetic_search",
    "linearize",
    "optimize",
    "passivity_form_check",
    "passivity_index",
    "passivity_outputs",
    "simulate_design",
]
