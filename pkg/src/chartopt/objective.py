"""Weighted perceptual objective over a single render of a chart spec."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from . import renderer
from .chart_model import ChartSpec
from .metrics import (
    LEGIBILITY_THRESHOLD,
    MetricError,
    ProxySaliency,
    SaliencyProvider,
    WaveTable,
    WsrReference,
    load_wave_table,
    task_saliency,
    text_legibility,
    wave_score,
    white_space_ratio,
    wsr_penalty,
)

FLAG_OVERFLOW = "overflow"
FLAG_ZERO_SALIENCY = "aoi_saliency_zero"
FLAG_EMPTY_FOREGROUND = "empty_foreground"


class EvaluationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ObjectiveWeights:
    w_w: float = 3.0
    w_c: float = 1.0
    w_t: float = 2.0
    w_s: float = 4.0

    def __post_init__(self):
        ws = (self.w_w, self.w_c, self.w_t, self.w_s)
        if any(w < 0 for w in ws) or not any(w > 0 for w in ws):
            raise ValueError(f"weights must be non-negative with at least one positive, got {ws}")

    @classmethod
    def parse(cls, text: str) -> "ObjectiveWeights":
        """Parse ``"w,c,t,s"`` (white space, colour, text, saliency)."""
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected four comma-separated weights w,c,t,s, got {text!r}")
        return cls(*parts)

    def combine(self, l_w: float, l_c: float, l_s: float, l_t: float) -> float:
        return self.w_w * l_w + self.w_c * l_c + self.w_t * l_t + self.w_s * l_s


@dataclass(frozen=True)
class MetricBreakdown:
    l_w: float
    l_c: float
    l_s: float
    l_t: float
    total: float
    flags: frozenset = field(default_factory=frozenset)

    def metrics_dict(self) -> dict:
        return {"l_w": self.l_w, "l_c": self.l_c, "l_s": self.l_s, "l_t": self.l_t}

    def to_dict(self) -> dict:
        return {**self.metrics_dict(), "total": self.total, "flags": sorted(self.flags)}


def breakdown(l_w, l_c, l_s, l_t, weights: ObjectiveWeights, flags=()) -> MetricBreakdown:
    return MetricBreakdown(l_w, l_c, l_s, l_t, weights.combine(l_w, l_c, l_s, l_t), frozenset(flags))


def evaluate(
    spec: ChartSpec,
    weights: ObjectiveWeights = ObjectiveWeights(),
    saliency: SaliencyProvider | None = None,
    wave: WaveTable | None = None,
    ref: WsrReference = WsrReference(),
    pyramid_factors: Sequence[float] = renderer.PYRAMID_FACTORS,
    legibility_threshold: float = LEGIBILITY_THRESHOLD,
) -> MetricBreakdown:
    """Render ``spec`` once and score it with all four metrics.

    Degenerate conditions do not abort: overflow, an all-zero AOI and an
    empty foreground fall back to their defined values and are flagged.
    """
    saliency = saliency or ProxySaliency()
    wave = wave if wave is not None else load_wave_table()
    flags = set()
    try:
        render = renderer.render(spec)
        if render.overflow:
            flags.add(FLAG_OVERFLOW)
        l_w = wsr_penalty(white_space_ratio(render), ref)
        try:
            l_c = wave_score(render, wave)
        except MetricError:
            l_c = 0.0
            flags.add(FLAG_EMPTY_FOREGROUND)
        aois = renderer.task_aois(render, spec.task)
        l_s, degenerate = task_saliency(saliency(render), aois)
        if degenerate:
            flags.add(FLAG_ZERO_SALIENCY)
        levels = renderer.pyramid_levels(render, pyramid_factors)
        l_t = text_legibility(render, levels, legibility_threshold)
    except Exception as exc:
        raise EvaluationError(f"evaluating candidate {spec.params}: {exc}") from exc
    return breakdown(l_w, l_c, l_s, l_t, weights, flags)


@dataclass
class Evaluator:
    """Bundles the metric configuration so candidates can be scored one call at a time."""

    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    saliency: SaliencyProvider = field(default_factory=ProxySaliency)
    wave: WaveTable = field(default_factory=load_wave_table)
    ref: WsrReference = field(default_factory=WsrReference)
    pyramid_factors: tuple = renderer.PYRAMID_FACTORS
    legibility_threshold: float = LEGIBILITY_THRESHOLD

    def __call__(self, spec: ChartSpec) -> MetricBreakdown:
        return evaluate(
            spec,
            self.weights,
            self.saliency,
            self.wave,
            self.ref,
            self.pyramid_factors,
            self.legibility_threshold,
        )
