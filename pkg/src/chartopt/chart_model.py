"""Chart specification, design-parameter space and task annotations."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .color import hex_to_hsv

FIXED_HEIGHT = 600
DEFAULT_BAR_HEX = "#949d48"
ROTATIONS = (0, -45, -90)
ORIENTATIONS = ("horizontal", "vertical")
TASK_TYPES = ("FE", "RV", "CDV", "CP")

HSV = tuple[float, float, float]


class SpecError(ValueError):
    """A spec violates one or more invariants.

    ``issues`` holds ``(field, message)`` pairs, one per violation.
    """

    def __init__(self, issues: Sequence[tuple[str, str]]):
        self.issues = list(issues)
        super().__init__("; ".join(f"{f}: {m}" for f, m in self.issues))


@dataclass(frozen=True)
class DataTable:
    rows: tuple[tuple[str, float], ...]
    value_unit: str | None = None

    @property
    def categories(self) -> list[str]:
        return [c for c, _ in self.rows]

    @property
    def values(self) -> list[float]:
        return [v for _, v in self.rows]

    def value_of(self, category: str) -> float:
        for c, v in self.rows:
            if c == category:
                return v
        raise KeyError(category)

    def issues(self) -> list[tuple[str, str]]:
        out = []
        if len(self.rows) < 2:
            out.append(("table", f"at least 2 rows required, got {len(self.rows)}"))
        seen = set()
        for i, (cat, val) in enumerate(self.rows):
            if not isinstance(cat, str) or not cat.strip():
                out.append((f"table[{i}].category", "category label must be non-empty"))
            elif cat in seen:
                out.append((f"table[{i}].category", f"duplicate category label {cat!r}"))
            seen.add(cat)
            if not isinstance(val, (int, float)) or not math.isfinite(val):
                out.append((f"table[{i}].value", f"value must be finite, got {val!r}"))
            elif val < 0:
                out.append((f"table[{i}].value", f"negative value {val!r} not supported"))
        return out


@dataclass(frozen=True)
class TaskSpec:
    task_type: str
    target_categories: tuple[str, ...] = ()
    question_text: str | None = None

    def issues(self, table: DataTable | None = None) -> list[tuple[str, str]]:
        out = []
        n = len(self.target_categories)
        if self.task_type not in TASK_TYPES:
            out.append(("task.type", f"unknown task type {self.task_type!r}"))
        elif self.task_type in ("FE", "RV"):
            # FE may leave its target implicit: the extremum is derived from the table
            if n > 1 or (self.task_type == "RV" and n != 1):
                out.append(("task.targets", f"{self.task_type} requires exactly one target"))
        elif n < 2:
            out.append(("task.targets", f"{self.task_type} requires two or more targets"))
        if len(set(self.target_categories)) != n:
            out.append(("task.targets", "duplicate target category"))
        if table is not None:
            known = set(table.categories)
            for t in self.target_categories:
                if t not in known:
                    out.append(("task.targets", f"unknown target category {t!r}"))
        return out

    def resolved_targets(self, table: DataTable) -> tuple[str, ...]:
        """Targets with an implicit FE extremum filled in (first maximal row)."""
        if self.task_type == "FE" and not self.target_categories:
            values = table.values
            return (table.categories[int(np.argmax(values))],)
        return self.target_categories


@dataclass(frozen=True)
class DesignParams:
    aspect_ratio: float
    axis_label_font_size: float
    data_label_font_size: float
    bar_width: float
    bar_color: HSV
    highlight_color: HSV
    label_rotation: int
    orientation: str

    def as_tuple(self) -> tuple:
        return (
            self.aspect_ratio,
            self.axis_label_font_size,
            self.data_label_font_size,
            self.bar_width,
            self.bar_color,
            self.highlight_color,
            self.label_rotation,
            self.orientation,
        )


@dataclass(frozen=True)
class Dimension:
    name: str
    kind: str  # "continuous" | "categorical" | "color"
    bounds: tuple[float, float] | None = None
    choices: tuple | None = None

    @property
    def width(self) -> int:
        """Number of unit-hypercube coordinates this dimension occupies."""
        return 3 if self.kind == "color" else 1


@dataclass(frozen=True)
class ParameterSpace:
    """The eight design dimensions and their unit-hypercube encoding.

    Continuous values map linearly onto [0, 1]. Colours take three
    coordinates (hue/360, saturation, value). Categorical dimensions take one
    coordinate decoded by equal-width interval partition.
    """

    dimensions: tuple[Dimension, ...]

    @classmethod
    def default(
        cls,
        aspect: tuple[float, float] = (0.33, 3.0),
        font: tuple[float, float] = (10.0, 36.0),
        bar_width: tuple[float, float] = (20.0, 180.0),
    ) -> "ParameterSpace":
        return cls(
            (
                Dimension("aspect_ratio", "continuous", bounds=tuple(aspect)),
                Dimension("axis_label_font_size", "continuous", bounds=tuple(font)),
                Dimension("data_label_font_size", "continuous", bounds=tuple(font)),
                Dimension("bar_width", "continuous", bounds=tuple(bar_width)),
                Dimension("bar_color", "color"),
                Dimension("highlight_color", "color"),
                Dimension("label_rotation", "categorical", choices=ROTATIONS),
                Dimension("orientation", "categorical", choices=ORIENTATIONS),
            )
        )

    @property
    def encoded_dim(self) -> int:
        return sum(d.width for d in self.dimensions)

    def __getitem__(self, name: str) -> Dimension:
        for d in self.dimensions:
            if d.name == name:
                return d
        raise KeyError(name)

    def encode(self, params: DesignParams) -> np.ndarray:
        out = []
        for dim in self.dimensions:
            value = getattr(params, dim.name)
            if dim.kind == "continuous":
                lo, hi = dim.bounds
                out.append((value - lo) / (hi - lo))
            elif dim.kind == "color":
                h, s, v = value
                out.extend([(h % 360.0) / 360.0, s, v])
            else:
                k = len(dim.choices)
                out.append((dim.choices.index(value) + 0.5) / k)
        return np.array(out, dtype=float)

    def issues(self, params: DesignParams) -> list[tuple[str, str]]:
        out = []
        for dim in self.dimensions:
            value = getattr(params, dim.name)
            name = f"params.{dim.name}"
            if dim.kind == "continuous":
                lo, hi = dim.bounds
                if not isinstance(value, (int, float)) or not (lo <= value <= hi):
                    out.append((name, f"{value!r} outside bound [{lo}, {hi}]"))
            elif dim.kind == "color":
                try:
                    h, s, v = value
                    ok = 0.0 <= h < 360.0 and 0.0 <= s <= 1.0 and 0.0 <= v <= 1.0
                except (TypeError, ValueError):
                    ok = False
                if not ok:
                    out.append((name, f"{value!r} is not an HSV triple in [0,360)x[0,1]x[0,1]"))
            elif value not in dim.choices:
                out.append((name, f"{value!r} not one of {list(dim.choices)}"))
        return out


DEFAULT_SPACE = ParameterSpace.default()


def clamp_to_space(raw, space: ParameterSpace = DEFAULT_SPACE) -> DesignParams:
    """Decode unit-hypercube coordinates into valid design parameters.

    Coordinates outside [0, 1] are clamped first, so the result always
    satisfies the space bounds.
    """
    u = np.asarray(raw, dtype=float).ravel()
    if u.shape[0] != space.encoded_dim:
        raise ValueError(f"expected {space.encoded_dim} coordinates, got {u.shape[0]}")
    u = np.clip(np.nan_to_num(u, nan=0.0), 0.0, 1.0)
    values = {}
    i = 0
    for dim in space.dimensions:
        if dim.kind == "continuous":
            lo, hi = dim.bounds
            t = float(u[i])
            values[dim.name] = lo * (1.0 - t) + hi * t
        elif dim.kind == "color":
            h = (360.0 * float(u[i])) % 360.0
            values[dim.name] = (h, float(u[i + 1]), float(u[i + 2]))
        else:
            k = len(dim.choices)
            values[dim.name] = dim.choices[min(int(u[i] * k), k - 1)]
        i += dim.width
    return DesignParams(**values)


@dataclass(frozen=True)
class ChartSpec:
    table: DataTable
    params: DesignParams
    task: TaskSpec
    fixed_height: int = FIXED_HEIGHT

    @property
    def width(self) -> int:
        return int(round(self.fixed_height * self.params.aspect_ratio))

    @property
    def height(self) -> int:
        return self.fixed_height

    @property
    def highlighted(self) -> tuple[str, ...]:
        return self.task.resolved_targets(self.table)

    def with_params(self, params: DesignParams) -> "ChartSpec":
        return replace(self, params=params)


def validate(spec: ChartSpec, space: ParameterSpace = DEFAULT_SPACE) -> ChartSpec:
    """Return ``spec`` unchanged or raise :class:`SpecError` listing every violation."""
    issues = spec.table.issues()
    issues += spec.task.issues(spec.table)
    issues += space.issues(spec.params)
    if spec.fixed_height != FIXED_HEIGHT:
        issues.append(("fixed_height", f"must be {FIXED_HEIGHT}, got {spec.fixed_height}"))
    if issues:
        raise SpecError(issues)
    return spec


def default_params(orientation: str = "horizontal") -> DesignParams:
    color = hex_to_hsv(DEFAULT_BAR_HEX)
    return DesignParams(
        aspect_ratio=1.0,
        axis_label_font_size=17.0,
        data_label_font_size=24.0,
        bar_width=40.0,
        bar_color=color,
        highlight_color=color,
        label_rotation=0,
        orientation=orientation,
    )


def default_spec(table: DataTable, task: TaskSpec, orientation: str = "horizontal") -> ChartSpec:
    """The untuned template chart every optimisation starts from."""
    return validate(ChartSpec(table, default_params(orientation), task))


# -- JSON chart spec files -------------------------------------------------

_SPEC_KEYS = {"table", "params", "task", "value_unit"}
_PARAM_KEYS = {
    "aspect_ratio",
    "axis_label_font_size",
    "data_label_font_size",
    "bar_width",
    "bar_color",
    "highlight_color",
    "label_rotation",
    "orientation",
}
_TASK_KEYS = {"type", "targets", "question"}


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise SpecError([(where, "expected a JSON object")])
    extra = sorted(set(obj) - allowed)
    if extra:
        raise SpecError([(where, f"unknown key(s) {extra}")])


def task_from_dict(obj: dict) -> TaskSpec:
    _reject_unknown(obj, _TASK_KEYS, "task")
    if "type" not in obj:
        raise SpecError([("task.type", "missing")])
    targets = obj.get("targets", [])
    if not isinstance(targets, list) or not all(isinstance(t, str) for t in targets):
        raise SpecError([("task.targets", "must be a list of category labels")])
    return TaskSpec(str(obj["type"]), tuple(targets), obj.get("question"))


def task_to_dict(task: TaskSpec) -> dict:
    out = {"type": task.task_type, "targets": list(task.target_categories)}
    if task.question_text is not None:
        out["question"] = task.question_text
    return out


def spec_from_dict(obj: dict) -> ChartSpec:
    _reject_unknown(obj, _SPEC_KEYS, "spec")
    missing = [k for k in ("table", "params", "task") if k not in obj]
    if missing:
        raise SpecError([(k, "missing") for k in missing])
    rows = []
    for i, row in enumerate(obj["table"]):
        _reject_unknown(row, {"category", "value"}, f"table[{i}]")
        rows.append((row.get("category"), row.get("value")))
    table = DataTable(tuple(rows), obj.get("value_unit"))
    p = obj["params"]
    _reject_unknown(p, _PARAM_KEYS, "params")
    missing = sorted(_PARAM_KEYS - set(p))
    if missing:
        raise SpecError([(f"params.{k}", "missing") for k in missing])
    params = DesignParams(
        aspect_ratio=p["aspect_ratio"],
        axis_label_font_size=p["axis_label_font_size"],
        data_label_font_size=p["data_label_font_size"],
        bar_width=p["bar_width"],
        bar_color=tuple(p["bar_color"]),
        highlight_color=tuple(p["highlight_color"]),
        label_rotation=p["label_rotation"],
        orientation=p["orientation"],
    )
    return ChartSpec(table, params, task_from_dict(obj["task"]))


def params_to_dict(params: DesignParams) -> dict:
    return {
        "aspect_ratio": params.aspect_ratio,
        "axis_label_font_size": params.axis_label_font_size,
        "data_label_font_size": params.data_label_font_size,
        "bar_width": params.bar_width,
        "bar_color": list(params.bar_color),
        "highlight_color": list(params.highlight_color),
        "label_rotation": params.label_rotation,
        "orientation": params.orientation,
    }


def spec_to_dict(spec: ChartSpec) -> dict:
    out = {
        "table": [{"category": c, "value": v} for c, v in spec.table.rows],
        "params": params_to_dict(spec.params),
        "task": task_to_dict(spec.task),
    }
    if spec.table.value_unit is not None:
        out["value_unit"] = spec.table.value_unit
    return out


def load_spec(path) -> ChartSpec:
    with open(path, encoding="utf-8") as fh:
        return spec_from_dict(json.load(fh))


def save_spec(spec: ChartSpec, path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2) + "\n", encoding="utf-8")
