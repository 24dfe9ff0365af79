"""Automatic bar-chart design optimisation against perceptual metrics."""

from .chart_model import ChartSpec, DataTable, DesignParams, ParameterSpace, SpecError, TaskSpec
from .chart_model import clamp_to_space, default_spec, validate
from .objective import Evaluator, MetricBreakdown, ObjectiveWeights, evaluate
from .optimiser import RunConfig, RunResult, run, sobol_search
from .renderer import render

__all__ = [
    "ChartSpec", "DataTable", "DesignParams", "ParameterSpace", "SpecError", "TaskSpec",
    "clamp_to_space", "default_spec", "validate",
    "Evaluator", "MetricBreakdown", "ObjectiveWeights", "evaluate",
    "RunConfig", "RunResult", "run", "sobol_search", "render",
]
