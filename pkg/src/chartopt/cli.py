"""Command-line front end: optimise, score, render and summarise traces.

Every failure exits non-zero with one ``error: ...`` line on stderr;
argparse usage errors exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from . import renderer
from .chart_model import ChartSpec, ParameterSpace, SpecError, load_spec, save_spec, validate
from .gp import GPConfig
from .ingestion import load_table, load_task
from .metrics import LEGIBILITY_THRESHOLD, FileSaliency, ProxySaliency, WsrReference, load_wave_table
from .objective import ObjectiveWeights, Evaluator, EvaluationError
from .optimiser import RunConfig, read_trace, run, write_trace

log = logging.getLogger("chartopt")

_DEFAULT_RUN = RunConfig()
_DEFAULT_WSR = WsrReference()


def _pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"lower bound must be below upper bound, got {text!r}")
    return lo, hi


def _factors(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated factors, got {text!r}") from None
    if not values or any(not 0 < f <= 1 for f in values):
        raise argparse.ArgumentTypeError(f"pyramid factors must lie in (0, 1], got {text!r}")
    return values


def _weights(text: str) -> ObjectiveWeights:
    try:
        return ObjectiveWeights.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _saliency_choice(text: str) -> str:
    if text == "proxy" or (text.startswith("file:") and len(text) > 5):
        return text
    raise argparse.ArgumentTypeError(f"expected 'proxy' or 'file:<dir>', got {text!r}")


def _metric_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--weights", type=_weights, default=ObjectiveWeights(),
                   help="objective weights w,c,t,s (default 3,1,2,4)")
    p.add_argument("--saliency", type=_saliency_choice, default="proxy",
                   help="'proxy' or 'file:<dir>' holding <chart_id>.<task>.png maps")
    p.add_argument("--chart-id", default=None, help="chart id for file saliency (default: input file stem)")
    p.add_argument("--wave-table", default=None, help="r,g,b,valence CSV (default: bundled table)")
    p.add_argument("--pyramid-factors", type=_factors, default=renderer.PYRAMID_FACTORS)
    p.add_argument("--legibility-threshold", type=float, default=LEGIBILITY_THRESHOLD)
    p.add_argument("--wsr-mu", type=float, default=_DEFAULT_WSR.mu)
    p.add_argument("--wsr-sigma", type=float, default=_DEFAULT_WSR.sigma)
    return p


def _bound_flags() -> argparse.ArgumentParser:
    space = ParameterSpace.default()
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--aspect-bounds", type=_pair, default=space["aspect_ratio"].bounds)
    p.add_argument("--font-bounds", type=_pair, default=space["axis_label_font_size"].bounds)
    p.add_argument("--bar-width-bounds", type=_pair, default=space["bar_width"].bounds)
    return p


def _space(args) -> ParameterSpace:
    return ParameterSpace.default(args.aspect_bounds, args.font_bounds, args.bar_width_bounds)


def _evaluator(args, chart_id: str, task_type: str) -> Evaluator:
    if args.saliency == "proxy":
        saliency = ProxySaliency()
    else:
        saliency = FileSaliency(args.saliency[len("file:"):], args.chart_id or chart_id, task_type)
    return Evaluator(
        weights=args.weights,
        saliency=saliency,
        wave=load_wave_table(args.wave_table),
        ref=WsrReference(args.wsr_mu, args.wsr_sigma),
        pyramid_factors=tuple(args.pyramid_factors),
        legibility_threshold=args.legibility_threshold,
    )


def _print_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def cmd_optimise(args) -> int:
    table = load_table(args.table)
    task = load_task(args.task)
    config = RunConfig(
        budget=args.budget, init=args.init, min_complete=args.min_complete, pool=args.pool,
        seed=args.seed, space=_space(args), gp=GPConfig(n_restarts=args.restarts),
    )
    evaluator = _evaluator(args, Path(args.table).stem, task.task_type)
    result = run(table, task, config, evaluator)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trace(result.trace, out / "trace.jsonl", timing=args.timing)
    if result.best is None:
        raise EvaluationError(f"all {len(result.trace)} trials failed; trace written to {out / 'trace.jsonl'}")
    best = result.best
    render = renderer.render(best)
    save_spec(best, out / "best.json")
    renderer.save_png(render.raster, out / "best.png")
    renderer.save_svg(render.scene, best.width, best.height, out / "best.svg")
    _print_json(result.best_breakdown.to_dict())
    return 0


def cmd_score(args) -> int:
    spec = validate(load_spec(args.spec), _space(args))
    evaluator = _evaluator(args, Path(args.spec).stem, spec.task.task_type)
    _print_json(evaluator(spec).to_dict())
    return 0


def cmd_render(args) -> int:
    spec: ChartSpec = validate(load_spec(args.spec), _space(args))
    render = renderer.render(spec)
    png = Path(args.out)
    if png.suffix.lower() != ".png":
        png = png.with_suffix(".png")
    png.parent.mkdir(parents=True, exist_ok=True)
    raster = render.raster
    if args.aoi:
        raster = renderer.overlay_aois(raster, renderer.task_aois(render, spec.task))
    renderer.save_png(raster, png)
    renderer.save_svg(render.scene, spec.width, spec.height, png.with_suffix(".svg"))
    return 0


def summarise_trace(records: list[dict]) -> dict:
    ok = [r for r in records if r.get("total") is not None]
    best = max(ok, key=lambda r: r["total"]) if ok else None
    flags = Counter(f for r in records for f in r.get("flags", []))
    return {
        "trials": len(records),
        "completed": len(ok),
        "phases": dict(Counter(r.get("phase") for r in records)),
        "best_total": best["total"] if best else None,
        "best_iter": best["iter"] if best else None,
        "best_params": best["params"] if best else None,
        "flags": dict(flags),
    }


def cmd_summarise(args) -> int:
    _print_json(summarise_trace(read_trace(args.trace)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chartopt", description="Perceptual bar-chart design optimiser")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    metric, bounds = _metric_flags(), _bound_flags()

    po = sub.add_parser("optimise", parents=[metric, bounds], help="optimise a chart for a task")
    po.add_argument("--table", required=True)
    po.add_argument("--task", required=True)
    po.add_argument("--out", required=True, help="output directory")
    po.add_argument("--seed", type=int, default=_DEFAULT_RUN.seed)
    po.add_argument("--budget", type=int, default=_DEFAULT_RUN.budget)
    po.add_argument("--init", type=int, default=_DEFAULT_RUN.init)
    po.add_argument("--min-complete", type=int, default=_DEFAULT_RUN.min_complete)
    po.add_argument("--pool", type=int, default=_DEFAULT_RUN.pool)
    po.add_argument("--restarts", type=int, default=_DEFAULT_RUN.gp.n_restarts,
                    help="likelihood multi-starts per GP fit")
    po.add_argument("--timing", action="store_true", help="record wall times (trace no longer byte-stable)")
    po.set_defaults(func=cmd_optimise)

    ps = sub.add_parser("score", parents=[metric, bounds], help="score one chart spec")
    ps.add_argument("--spec", required=True)
    ps.set_defaults(func=cmd_score)

    pr = sub.add_parser("render", parents=[bounds], help="render a chart spec to PNG and SVG")
    pr.add_argument("--spec", required=True)
    pr.add_argument("--out", required=True, help="PNG path; the SVG is written alongside")
    pr.add_argument("--aoi", action="store_true", help="overlay task areas of interest")
    pr.set_defaults(func=cmd_render)

    pt = sub.add_parser("summarise", help="summarise a trace.jsonl file")
    pt.add_argument("--trace", required=True)
    pt.set_defaults(func=cmd_summarise)
    return p


def _one_line(exc: BaseException) -> str:
    return " ".join((str(exc) or type(exc).__name__).split())


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (SpecError, EvaluationError, ValueError, OSError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {_one_line(exc)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
