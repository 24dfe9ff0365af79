"""Deterministic bar-chart compiler and rasteriser.

``layout`` turns a :class:`ChartSpec` into a :class:`SceneGraph` of
rectangles, text runs and an axis line. ``rasterise`` turns a scene into an
RGB pixel grid plus an element index (one record per bar and per label) that
the metrics use to locate task regions and text.

Text uses a fixed monospace metric model: every glyph advances
``0.60 * font_size`` and has cap-height ``0.70 * font_size``. Glyphs are
rasterised as filled boxes so results are bit-identical across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np
from scipy import sparse

from .chart_model import ChartSpec, TaskSpec
from .color import hsv_to_rgb, rgb_to_hex

RGB = tuple[int, int, int]

GLYPH_ADVANCE = 0.60
CAP_HEIGHT = 0.70
GLYPH_SIDE_BEARING = 0.10  # blank space either side of a glyph box, x font size
MARGIN = 10
GUTTER_PAD = 8
LABEL_PAD = 4
BACKGROUND: RGB = (255, 255, 255)
TEXT_COLOR: RGB = (0, 0, 0)
AXIS_COLOR: RGB = (136, 136, 136)
PYRAMID_FACTORS = (1 / 8, 1 / 4, 1 / 2)


# -- scene primitives ------------------------------------------------------


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float
    fill: RGB
    kind: str | None = None  # "bar" gets an element record
    category: str | None = None
    value: float | None = None


@dataclass(frozen=True)
class Text:
    text: str
    cx: float  # centre of the (rotated) text box
    cy: float
    font_size: float
    rotation: float = 0.0  # degrees, negative = counter-clockwise on screen
    color: RGB = TEXT_COLOR
    kind: str | None = None  # "category_label" | "data_label"
    category: str | None = None
    placement: str | None = None  # data labels: "outside" | "inside"

    @property
    def length(self) -> float:
        return len(self.text) * GLYPH_ADVANCE * self.font_size

    @property
    def cap_height(self) -> float:
        return CAP_HEIGHT * self.font_size

    def _frame(self):
        t = math.radians(self.rotation)
        d = np.array([math.cos(t), math.sin(t)])  # along the baseline
        n = np.array([-math.sin(t), math.cos(t)])  # towards glyph bottom
        return d, n

    def _local_to_screen(self, pts: np.ndarray) -> np.ndarray:
        d, n = self._frame()
        return np.array([self.cx, self.cy]) + pts[:, :1] * d + pts[:, 1:] * n

    def corners(self) -> np.ndarray:
        hw, hh = self.length / 2, self.cap_height / 2
        local = np.array([[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]])
        return self._local_to_screen(local)

    def bbox(self) -> tuple[float, float, float, float]:
        c = self.corners()
        return c[:, 0].min(), c[:, 1].min(), c[:, 0].max(), c[:, 1].max()

    def glyph_quads(self) -> list[np.ndarray]:
        fs = self.font_size
        adv = GLYPH_ADVANCE * fs
        bear = GLYPH_SIDE_BEARING * fs
        hh = self.cap_height / 2
        left = -self.length / 2
        quads = []
        for k, ch in enumerate(self.text):
            if ch.isspace():
                continue
            a = left + k * adv + bear
            b = left + (k + 1) * adv - bear
            local = np.array([[a, -hh], [b, -hh], [b, hh], [a, hh]])
            quads.append(self._local_to_screen(local))
        return quads


@dataclass(frozen=True)
class AxisLine:
    x0: float
    y0: float
    x1: float
    y1: float
    color: RGB = AXIS_COLOR


def rotated_extent(text: str, font_size: float, rotation: float) -> tuple[float, float]:
    """Width and height of the axis-aligned box around rotated text."""
    w = len(text) * GLYPH_ADVANCE * font_size
    h = CAP_HEIGHT * font_size
    t = math.radians(rotation)
    c, s = abs(math.cos(t)), abs(math.sin(t))
    return w * c + h * s, w * s + h * c


@dataclass(frozen=True)
class SceneGraph:
    items: tuple = ()
    background: RGB = BACKGROUND
    overflow: tuple[str, ...] = ()

    def ordered(self) -> list:
        """Draw order: axes, bars/shapes, then labels (background is the canvas fill)."""
        rank = {AxisLine: 0, Rect: 1, Text: 2}
        return sorted(self.items, key=lambda it: rank[type(it)])


# -- element index ---------------------------------------------------------


@dataclass(frozen=True)
class ElementRecord:
    kind: str  # bar | category_label | data_label | axis
    bbox: tuple[int, int, int, int]  # x0, y0, x1, y1; half-open, may exceed the canvas
    category: str | None = None
    text: str | None = None
    glyph_height: float | None = None
    fill: RGB | None = None
    value: float | None = None
    placement: str | None = None

    @property
    def area(self) -> int:
        x0, y0, x1, y1 = self.bbox
        return max(0, x1 - x0) * max(0, y1 - y0)

    @property
    def is_label(self) -> bool:
        return self.kind in ("category_label", "data_label")


@dataclass(frozen=True)
class RenderResult:
    raster: np.ndarray  # (height, width, 3) uint8
    elements: tuple[ElementRecord, ...]
    overflow: tuple[str, ...] = ()
    scene: SceneGraph | None = None

    @property
    def width(self) -> int:
        return self.raster.shape[1]

    @property
    def height(self) -> int:
        return self.raster.shape[0]

    def bars(self) -> list[ElementRecord]:
        return [e for e in self.elements if e.kind == "bar"]

    def labels(self) -> list[ElementRecord]:
        return [e for e in self.elements if e.is_label]

    def find(self, kind: str, category: str) -> ElementRecord:
        for e in self.elements:
            if e.kind == kind and e.category == category:
                return e
        raise LookupError(f"no {kind} element for category {category!r}")


# -- layout ----------------------------------------------------------------


def format_value(value: float, unit: str | None = None) -> str:
    if float(value).is_integer():
        s = str(int(value))
    else:
        s = f"{value:.2f}".rstrip("0").rstrip(".")
    return f"{s}{unit}" if unit else s


def bar_gap(bar_width: float) -> float:
    return max(4.0, 0.25 * bar_width)


def layout(spec: ChartSpec) -> SceneGraph:
    """Compile a validated spec into a scene graph.

    Bars keep table order. Bar length is proportional to value with zero at
    the axis. Anything that does not fit the canvas is still placed and
    listed in ``overflow``.
    """
    p = spec.params
    W, H = spec.width, spec.height
    table = spec.table
    n = len(table.rows)
    bw = p.bar_width
    gap = bar_gap(bw)
    pitch = bw + gap
    thickness = int(round(bw))
    fa, fd = p.axis_label_font_size, p.data_label_font_size
    base_rgb = hsv_to_rgb(p.bar_color)
    high_rgb = hsv_to_rgb(p.highlight_color)
    highlighted = set(spec.highlighted)
    unit = table.value_unit

    cat_ext = [rotated_extent(c, fa, p.label_rotation) for c in table.categories]
    data_text = [format_value(v, unit) for v in table.values]
    data_len = [len(t) * GLYPH_ADVANCE * fd for t in data_text]
    data_cap = CAP_HEIGHT * fd
    vmax = max(table.values)
    imax = int(np.argmax(table.values))
    horizontal = p.orientation == "horizontal"

    if horizontal:
        gutter = max(w for w, _ in cat_ext) + GUTTER_PAD
        axis_pos = MARGIN + gutter
        avail = (W - MARGIN) - axis_pos
        reserve = data_len[imax] + LABEL_PAD
        band_span = H - 2 * MARGIN
    else:
        gutter = max(h for _, h in cat_ext) + GUTTER_PAD
        axis_pos = H - MARGIN - gutter
        avail = axis_pos - MARGIN
        reserve = data_cap + LABEL_PAD
        band_span = W - 2 * MARGIN

    overflow = []
    if avail <= 0:
        overflow.append("no room for the value axis")
    scale_len = avail - reserve
    if scale_len < 0.5 * avail:
        scale_len = avail
    scale = max(scale_len, 0.0) / vmax if vmax > 0 else 0.0
    total = n * pitch
    if total > band_span:
        overflow.append(f"bars need {total:.1f}px along the category axis, {band_span}px available")
    start = MARGIN + (band_span - total) / 2
    axis_px = int(round(axis_pos))

    items: list = []
    if horizontal:
        items.append(AxisLine(axis_px - 1, MARGIN, axis_px, H - MARGIN))
    else:
        items.append(AxisLine(MARGIN, axis_px, W - MARGIN, axis_px + 1))

    for i, (cat, val) in enumerate(table.rows):
        lo = int(round(start + i * pitch + gap / 2))
        hi = lo + thickness
        length = int(round(val * scale))
        if val > 0 and length == 0:
            length = 1
        fill = high_rgb if cat in highlighted else base_rgb
        centre = (lo + hi) / 2
        cw, ch = cat_ext[i]
        dl = data_len[i]
        if horizontal:
            end = axis_px + length
            items.append(Rect(axis_px, lo, end, hi, fill, "bar", cat, val))
            items.append(
                Text(cat, axis_px - LABEL_PAD - cw / 2, centre, fa, p.label_rotation,
                     kind="category_label", category=cat)
            )
            if end + LABEL_PAD + dl <= W - MARGIN + 1:
                cx, where = end + LABEL_PAD + dl / 2, "outside"
            else:
                cx, where = end - LABEL_PAD - dl / 2, "inside"
            items.append(Text(data_text[i], cx, centre, fd, 0.0, kind="data_label",
                              category=cat, placement=where))
        else:
            top = axis_px - length
            items.append(Rect(lo, top, hi, axis_px, fill, "bar", cat, val))
            # rotated labels hang from the tick: right edge of the box at the bar centre
            cx = centre if p.label_rotation == 0 else centre + CAP_HEIGHT * fa / 2 - cw / 2
            items.append(
                Text(cat, cx, axis_px + LABEL_PAD + ch / 2, fa, p.label_rotation,
                     kind="category_label", category=cat)
            )
            if top - LABEL_PAD - data_cap >= MARGIN - 1:
                cy, where = top - LABEL_PAD - data_cap / 2, "outside"
            else:
                cy, where = top + LABEL_PAD + data_cap / 2, "inside"
            items.append(Text(data_text[i], centre, cy, fd, 0.0, kind="data_label",
                              category=cat, placement=where))

    for it in items:
        if isinstance(it, Text):
            x0, y0, x1, y1 = it.bbox()
            what = f"{it.kind} {it.text!r}"
        elif isinstance(it, Rect):
            x0, y0, x1, y1 = it.x0, it.y0, it.x1, it.y1
            what = f"bar {it.category!r}"
        else:
            continue
        if x0 < 0 or y0 < 0 or x1 > W or y1 > H:
            overflow.append(f"{what} extends beyond the canvas")
    return SceneGraph(tuple(items), overflow=tuple(overflow))


# -- rasterisation ---------------------------------------------------------


def _pixel_span(a: float, b: float, limit: int) -> tuple[int, int]:
    # pixels whose centre lies in [a, b)
    lo = max(0, math.ceil(a - 0.5))
    hi = min(limit, math.ceil(b - 0.5))
    return lo, hi


def _fill_rect(img: np.ndarray, x0, y0, x1, y1, color) -> None:
    h, w = img.shape[:2]
    c0, c1 = _pixel_span(x0, x1, w)
    r0, r1 = _pixel_span(y0, y1, h)
    if c1 > c0 and r1 > r0:
        img[r0:r1, c0:c1] = color


def _fill_convex(img: np.ndarray, quad: np.ndarray, color) -> None:
    h, w = img.shape[:2]
    c0, c1 = _pixel_span(quad[:, 0].min(), quad[:, 0].max() + 1, w)
    r0, r1 = _pixel_span(quad[:, 1].min(), quad[:, 1].max() + 1, h)
    if c1 <= c0 or r1 <= r0:
        return
    ys, xs = np.mgrid[r0:r1, c0:c1]
    px, py = xs + 0.5, ys + 0.5
    inside = np.ones(px.shape, dtype=bool)
    sign = None
    for k in range(len(quad)):
        ax, ay = quad[k]
        bx, by = quad[(k + 1) % len(quad)]
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        if sign is None:
            # orientation of the polygon decides which side is inside
            cx, cy = quad.mean(axis=0)
            sign = 1.0 if (bx - ax) * (cy - ay) - (by - ay) * (cx - ax) >= 0 else -1.0
        inside &= sign * cross >= 0
    img[r0:r1, c0:c1][inside] = color


def _int_box(x0, y0, x1, y1) -> tuple[int, int, int, int]:
    return math.floor(x0 + 1e-9), math.floor(y0 + 1e-9), math.ceil(x1 - 1e-9), math.ceil(y1 - 1e-9)


def rasterise(scene: SceneGraph, w: int, h: int) -> RenderResult:
    """Paint ``scene`` onto a ``w`` x ``h`` canvas (pixel-centre sampling, no anti-aliasing)."""
    if w <= 0 or h <= 0:
        raise ValueError(f"canvas must be positive, got {w}x{h}")
    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:] = scene.background
    elements = []
    for it in scene.ordered():
        if isinstance(it, AxisLine):
            _fill_rect(img, it.x0, it.y0, it.x1, it.y1, it.color)
            elements.append(ElementRecord("axis", _int_box(it.x0, it.y0, it.x1, it.y1), fill=it.color))
        elif isinstance(it, Rect):
            _fill_rect(img, it.x0, it.y0, it.x1, it.y1, it.fill)
            if it.kind == "bar":
                elements.append(
                    ElementRecord("bar", _int_box(it.x0, it.y0, it.x1, it.y1), category=it.category,
                                  fill=it.fill, value=it.value)
                )
        else:
            axis_aligned = it.rotation % 90 == 0
            for quad in it.glyph_quads():
                if axis_aligned:
                    _fill_rect(img, quad[:, 0].min(), quad[:, 1].min(),
                               quad[:, 0].max(), quad[:, 1].max(), it.color)
                else:
                    _fill_convex(img, quad, it.color)
            if it.kind is not None:
                elements.append(
                    ElementRecord(it.kind, _int_box(*it.bbox()), category=it.category, text=it.text,
                                  glyph_height=it.cap_height, fill=it.color, placement=it.placement)
                )
    return RenderResult(img, tuple(elements), scene.overflow, scene)


def render(spec: ChartSpec) -> RenderResult:
    return rasterise(layout(spec), spec.width, spec.height)


# -- image pyramid ---------------------------------------------------------


def _area_matrix(n_in: int, n_out: int) -> sparse.csr_matrix:
    """Sparse row-stochastic matrix: each output cell averages the input cells it overlaps."""
    scale = n_in / n_out  # >= 1, so an input cell touches at most two output cells
    j = np.arange(n_in)
    first = np.minimum(np.floor(j / scale).astype(int), n_out - 1)
    split = (first + 1) * scale
    w_first = np.minimum(split, j + 1) - j
    w_second = (j + 1) - split
    second = np.minimum(first + 1, n_out - 1)
    keep = w_second > 1e-12
    rows = np.concatenate([first, second[keep]])
    cols = np.concatenate([j, j[keep]])
    vals = np.concatenate([w_first, w_second[keep]]) / scale
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n_out, n_in))


def downsample(raster: np.ndarray, factor: float) -> np.ndarray:
    """Area-averaging resize to ``round(factor * size)`` along each axis."""
    return _downsample(raster.astype(float), factor)


def _downsample(img: np.ndarray, factor: float) -> np.ndarray:
    if not 0 < factor <= 1:
        raise ValueError(f"pyramid factor must be in (0, 1], got {factor}")
    h, w, c = img.shape
    oh, ow = int(round(factor * h)), int(round(factor * w))
    if oh == 0 or ow == 0:
        raise ValueError(f"factor {factor} reduces a {w}x{h} image to zero size")
    cols = _area_matrix(h, oh) @ img.reshape(h, w * c)  # (oh, w*c)
    cols = cols.reshape(oh, w, c).transpose(1, 0, 2).reshape(w, oh * c)
    out = (_area_matrix(w, ow) @ cols).reshape(ow, oh, c).transpose(1, 0, 2)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def pyramid(render: RenderResult, factors: Sequence[float] = PYRAMID_FACTORS) -> list[np.ndarray]:
    img = render.raster.astype(float)
    return [_downsample(img, f) for f in factors]


@dataclass(frozen=True)
class PyramidLevel:
    factor: float
    labels: tuple[tuple[tuple[float, float, float, float], float], ...]  # (scaled bbox, glyph height)
    canvas: tuple[float, float]  # scaled (width, height)
    source: np.ndarray | None = field(default=None, repr=False, compare=False)

    @cached_property
    def raster(self) -> np.ndarray:
        """Downsampled image, computed on first access."""
        if self.source is None:
            raise ValueError("pyramid level has no source raster")
        return downsample(self.source, self.factor)


def pyramid_levels(render: RenderResult, factors: Sequence[float] = PYRAMID_FACTORS) -> list[PyramidLevel]:
    """Label index scaled to each level; the downsampled raster is built lazily."""
    labels = render.labels()
    out = []
    for f in factors:
        if not 0 < f <= 1:
            raise ValueError(f"pyramid factor must be in (0, 1], got {f}")
        scaled = tuple((tuple(c * f for c in e.bbox), e.glyph_height * f) for e in labels)
        out.append(PyramidLevel(f, scaled, (render.width * f, render.height * f), render.raster))
    return out


# -- task regions ----------------------------------------------------------

Box = tuple[int, int, int, int]


def _union(a: Box, b: Box) -> Box:
    return min(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), max(a[3], b[3])


def _clip(box: Box, w: int, h: int) -> Box:
    x0, y0 = min(max(box[0], 0), w), min(max(box[1], 0), h)
    x1, y1 = max(min(box[2], w), x0), max(min(box[3], h), y0)
    return x0, y0, x1, y1


def task_aois(render: RenderResult, task: TaskSpec) -> list[Box]:
    """Pixel rectangles the task directs attention to, clipped to the canvas.

    RV/CDV/CP: each target bar joined with its data label. FE: the extremum
    bar joined with its category label. The FE bar is the explicit target when
    one is annotated, else the first maximal bar.
    """
    bars = render.bars()
    if task.task_type == "FE":
        if task.target_categories:
            targets = task.target_categories[:1]
        else:
            if not bars:
                raise LookupError("FE task on a render without bars")
            values = [b.value for b in bars]
            targets = (bars[int(np.argmax(values))].category,)
        partner = "category_label"
    else:
        targets = task.target_categories
        partner = "data_label"
    out = []
    for cat in targets:
        bar = render.find("bar", cat)
        label = render.find(partner, cat)
        out.append(_clip(_union(bar.bbox, label.bbox), render.width, render.height))
    return out


# -- export ----------------------------------------------------------------


def save_png(raster: np.ndarray, path) -> None:
    from PIL import Image

    Image.fromarray(np.ascontiguousarray(raster), "RGB").save(path, format="PNG")


def overlay_aois(raster: np.ndarray, boxes: Sequence[Box], color: RGB = (255, 0, 0)) -> np.ndarray:
    out = raster.copy()
    for x0, y0, x1, y1 in boxes:
        if x1 <= x0 or y1 <= y0:
            continue
        out[y0, x0:x1] = color
        out[y1 - 1, x0:x1] = color
        out[y0:y1, x0] = color
        out[y0:y1, x1 - 1] = color
    return out


def scene_to_svg(scene: SceneGraph, w: int, h: int) -> str:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="{rgb_to_hex(scene.background)}"/>',
    ]
    for it in scene.ordered():
        if isinstance(it, AxisLine):
            parts.append(
                f'<rect class="axis" x="{it.x0:g}" y="{it.y0:g}" width="{it.x1 - it.x0:g}" '
                f'height="{it.y1 - it.y0:g}" fill="{rgb_to_hex(it.color)}"/>'
            )
        elif isinstance(it, Rect):
            cat = f" data-category={quoteattr(it.category)}" if it.category is not None else ""
            parts.append(
                f'<rect class="{it.kind or "shape"}" x="{it.x0:g}" y="{it.y0:g}" '
                f'width="{it.x1 - it.x0:g}" height="{it.y1 - it.y0:g}" '
                f'fill="{rgb_to_hex(it.fill)}"{cat}/>'
            )
        else:
            cat = f" data-category={quoteattr(it.category)}" if it.category is not None else ""
            rot = f' transform="rotate({it.rotation:g} {it.cx:g} {it.cy:g})"' if it.rotation else ""
            parts.append(
                f'<text class="{it.kind or "text"}" x="{it.cx:g}" y="{it.cy:g}" '
                f'font-family="monospace" font-size="{it.font_size:g}" text-anchor="middle" '
                f'dominant-baseline="central" fill="{rgb_to_hex(it.color)}"{rot}{cat}>'
                f"{escape(it.text)}</text>"
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_svg(scene: SceneGraph, w: int, h: int, path) -> None:
    Path(path).write_text(scene_to_svg(scene, w, h), encoding="utf-8")
