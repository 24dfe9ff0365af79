"""Bayesian optimisation of chart design parameters.

A run evaluates a scrambled Sobol initial design, then alternates GP fit,
Expected-Improvement argmax over a fresh Sobol candidate pool, and
evaluation until the budget is spent.
"""

from __future__ import annotations

import json
import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm, qmc

from .chart_model import DEFAULT_SPACE, ChartSpec, DataTable, DesignParams, ParameterSpace, TaskSpec
from .chart_model import clamp_to_space, params_to_dict, validate
from .gp import GPConfig, Observation, SurrogateState, gp_fit, gp_posterior_batch
from .objective import EvaluationError, Evaluator, MetricBreakdown

log = logging.getLogger(__name__)

PHASE_INIT = "sobol"
PHASE_GP = "gp"


def sobol_points(n: int, d: int, seed: int) -> np.ndarray:
    """First ``n`` points of a scrambled Sobol sequence in [0, 1]^d."""
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # balance warning for n not a power of 2
        return qmc.Sobol(d, scramble=True, seed=seed).random(n)


def _substream(seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1)[0])


# -- acquisition ------------------------------------------------------------


def ei_from_moments(mean, std, y_star):
    """Closed-form Expected Improvement for a Gaussian with the given moments."""
    mean = np.asarray(mean, float)
    std = np.asarray(std, float)
    gain = mean - y_star
    safe = np.where(std > 0, std, 1.0)
    with np.errstate(over="ignore", divide="ignore"):  # tiny std sends z to +-inf, which is fine
        z = gain / safe
        ei = gain * norm.cdf(z) + safe * norm.pdf(z)
    ei = np.where(std > 0, ei, np.maximum(gain, 0.0))
    return np.maximum(ei, 0.0)


def expected_improvement(state: SurrogateState, x, y_star: float) -> float:
    mean, var = gp_posterior_batch(state, np.asarray(x, float)[None, :])
    return float(ei_from_moments(mean, np.sqrt(var), y_star)[0])


def acquisition_pool(state: SurrogateState, pool_size: int, seed: int, y_star: float | None = None):
    """Sobol candidate pool and its EI values."""
    if y_star is None:
        y_star = float(state.y.max())
    pool = sobol_points(pool_size, state.dim, seed)
    mean, var = gp_posterior_batch(state, pool)
    return pool, ei_from_moments(mean, np.sqrt(var), y_star)


def suggest_next(state: SurrogateState, pool_size: int, seed: int, y_star: float | None = None) -> np.ndarray:
    """EI-argmax over a fresh Sobol pool; ties go to the lowest pool index."""
    pool, ei = acquisition_pool(state, pool_size, seed, y_star)
    return pool[int(np.argmax(ei))]


# -- run --------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    budget: int = 50
    init: int = 16
    min_complete: int = 5
    pool: int = 2048
    seed: int = 0
    space: ParameterSpace = DEFAULT_SPACE
    gp: GPConfig = field(default_factory=GPConfig)

    def __post_init__(self):
        if self.budget < 1 or self.init < 1 or self.pool < 1 or self.min_complete < 1:
            raise ValueError("budget, init, pool and min_complete must all be >= 1")


@dataclass(frozen=True)
class Trial:
    iteration: int
    point: np.ndarray
    params: DesignParams
    breakdown: MetricBreakdown | None
    best_so_far: float | None
    wall_time: float
    phase: str
    error: str | None = None

    @property
    def total(self) -> float:
        return self.breakdown.total if self.breakdown is not None else float("nan")

    @property
    def flags(self) -> list[str]:
        flags = sorted(self.breakdown.flags) if self.breakdown is not None else []
        return flags + (["error"] if self.error else [])

    def to_record(self, timing: bool = False) -> dict:
        return {
            "iter": self.iteration,
            "phase": self.phase,
            "params": params_to_dict(self.params),
            "metrics": self.breakdown.metrics_dict() if self.breakdown else None,
            "total": self.breakdown.total if self.breakdown else None,
            "best_so_far": self.best_so_far,
            "wall_time_s": self.wall_time if timing else None,
            "flags": self.flags,
        }


@dataclass(frozen=True)
class RunResult:
    best: ChartSpec | None
    best_breakdown: MetricBreakdown | None
    trace: tuple[Trial, ...]

    @property
    def best_total(self) -> float:
        return self.best_breakdown.total if self.best_breakdown else float("nan")


def trace_lines(trace: Sequence[Trial], timing: bool = False) -> list[str]:
    return [json.dumps(t.to_record(timing), sort_keys=True) for t in trace]


def write_trace(trace: Sequence[Trial], path, timing: bool = False) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in trace_lines(trace, timing):
            fh.write(line + "\n")


def read_trace(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


class _Runner:
    def __init__(self, table: DataTable, task: TaskSpec, config: RunConfig,
                 evaluate: Callable[[ChartSpec], MetricBreakdown]):
        self.table, self.task, self.config, self.evaluate = table, task, config, evaluate
        self.trace: list[Trial] = []
        self.best: float | None = None

    def step(self, point: np.ndarray, phase: str, t0: float | None = None) -> Trial:
        """Evaluate one point; ``t0`` marks when work on this step began (surrogate fit included)."""
        t0 = time.perf_counter() if t0 is None else t0
        params = clamp_to_space(point, self.config.space)
        spec = ChartSpec(self.table, params, self.task)
        breakdown, error = None, None
        try:
            breakdown = self.evaluate(spec)
            if not np.isfinite(breakdown.total):
                error = "non-finite objective"
        except EvaluationError as exc:
            error = str(exc)
            log.warning("trial %d failed: %s", len(self.trace), exc)
        if error is None and (self.best is None or breakdown.total > self.best):
            self.best = breakdown.total
        trial = Trial(len(self.trace), np.asarray(point, float), params, breakdown, self.best,
                      time.perf_counter() - t0, phase, error)
        self.trace.append(trial)
        return trial

    def observations(self) -> list[Observation]:
        return [Observation(t.point, t.total, frozenset(t.flags)) for t in self.trace if t.error is None]

    def result(self) -> RunResult:
        ok = [t for t in self.trace if t.error is None]
        if not ok:
            return RunResult(None, None, tuple(self.trace))
        top = max(ok, key=lambda t: t.total)  # first maximal trial on ties
        return RunResult(ChartSpec(self.table, top.params, self.task), top.breakdown, tuple(self.trace))


def _evaluator(evaluator):
    return evaluator if evaluator is not None else Evaluator()


def run(table: DataTable, task: TaskSpec, config: RunConfig = RunConfig(),
        evaluator: Callable[[ChartSpec], MetricBreakdown] | None = None) -> RunResult:
    """Optimise the design of one chart for one task."""
    validate(ChartSpec(table, _probe_params(config.space), task), config.space)
    runner = _Runner(table, task, config, _evaluator(evaluator))
    d = config.space.encoded_dim
    n_init = min(config.init, config.budget)
    for x in sobol_points(n_init, d, config.seed):
        runner.step(x, PHASE_INIT)
    while len(runner.trace) < config.budget:
        t0 = time.perf_counter()
        i = len(runner.trace)
        obs = runner.observations()
        if len(obs) < config.min_complete:
            # keep space-filling until enough trials completed to fit a surrogate
            x = sobol_points(i + 1, d, config.seed)[i]
            runner.step(x, PHASE_INIT, t0)
            continue
        gp_config = GPConfig(**{**config.gp.__dict__, "seed": _substream(config.seed, i, 1)})
        state = gp_fit(obs, gp_config)
        x = suggest_next(state, config.pool, _substream(config.seed, i, 2))
        runner.step(x, PHASE_GP, t0)
    return runner.result()


def sobol_search(table: DataTable, task: TaskSpec, config: RunConfig = RunConfig(),
                 evaluator: Callable[[ChartSpec], MetricBreakdown] | None = None) -> RunResult:
    """Baseline: evaluate the first ``budget`` Sobol points, no surrogate."""
    validate(ChartSpec(table, _probe_params(config.space), task), config.space)
    runner = _Runner(table, task, config, _evaluator(evaluator))
    for x in sobol_points(config.budget, config.space.encoded_dim, config.seed):
        runner.step(x, PHASE_INIT)
    return runner.result()


def _probe_params(space: ParameterSpace) -> DesignParams:
    return clamp_to_space(np.full(space.encoded_dim, 0.5), space)
