"""The four perceptual chart metrics.

white space ratio penalty, colour preference (WAVE lookup), task saliency
over areas of interest, and pyramid text legibility. All functions are pure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .color import srgb_to_lab
from .renderer import PyramidLevel, RenderResult

WHITE = 0xFFFFFF
SALIENCY_RING = 20
LEGIBILITY_THRESHOLD = 5.0
DEFAULT_WAVE_TABLE = "wave_bcp32_v1.csv"


class MetricError(ValueError):
    pass


# -- white space ------------------------------------------------------------


@dataclass(frozen=True)
class WsrReference:
    mu: float = 0.496
    sigma: float = 0.263

    def __post_init__(self):
        if not self.sigma > 0 or not 0 < self.mu < 1:
            raise ValueError(f"invalid WSR reference mu={self.mu}, sigma={self.sigma}")


def _packed(raster: np.ndarray) -> np.ndarray:
    r = raster.astype(np.uint32)
    return (r[..., 0] << 16) | (r[..., 1] << 8) | r[..., 2]


def white_space_ratio(render: RenderResult | np.ndarray) -> float:
    """Fraction of pixels exactly equal to #FFFFFF."""
    raster = render.raster if isinstance(render, RenderResult) else render
    flat = raster.reshape(-1, 3)
    if flat.dtype != np.uint8:
        return int(np.all(flat == 255, axis=1).sum()) / flat.shape[0]
    white = np.count_nonzero((flat[:, 0] & flat[:, 1] & flat[:, 2]) == 255)
    return white / flat.shape[0]


def wsr_penalty(wsr: float, ref: WsrReference = WsrReference()) -> float:
    if ref.mu - ref.sigma < wsr < ref.mu + ref.sigma:
        return 0.0
    return -abs(wsr - ref.mu)


# -- colour preference ------------------------------------------------------


@dataclass(frozen=True)
class WaveTable:
    rgb: np.ndarray  # (k, 3) anchor colours
    valence: np.ndarray  # (k,) in [0, 1]
    source_id: str

    def __post_init__(self):
        if len(self.rgb) < 8 or len(self.rgb) != len(self.valence):
            raise ValueError("a WAVE table needs at least 8 anchors with one valence each")
        if np.any(self.valence < 0) or np.any(self.valence > 1):
            raise ValueError("anchor valences must lie in [0, 1]")

    @property
    def lab(self) -> np.ndarray:
        return srgb_to_lab(self.rgb)

    def nearest(self, colors) -> np.ndarray:
        """Index of the nearest anchor (CIE76) for each sRGB colour."""
        d = np.linalg.norm(srgb_to_lab(colors)[:, None, :] - self.lab[None, :, :], axis=-1)
        return np.argmin(d, axis=1)


def load_wave_table(path=None) -> WaveTable:
    """Read a ``r,g,b,valence`` CSV; the bundled anchor table when ``path`` is None."""
    if path is None:
        src = resources.files("chartopt") / "data" / DEFAULT_WAVE_TABLE
        text, source_id = src.read_text(encoding="utf-8"), Path(DEFAULT_WAVE_TABLE).stem
    else:
        text, source_id = Path(path).read_text(encoding="utf-8"), Path(path).stem
    reader = csv.DictReader(text.splitlines())
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["r", "g", "b", "valence"]:
        raise ValueError(f"WAVE table header must be r,g,b,valence, got {reader.fieldnames}")
    rgb, val = [], []
    for row in reader:
        rgb.append([int(row["r"]), int(row["g"]), int(row["b"])])
        val.append(float(row["valence"]))
    return WaveTable(np.array(rgb, dtype=float), np.array(val, dtype=float), source_id)


def wave_score(render: RenderResult | np.ndarray, table: WaveTable) -> float:
    """Area-weighted mean valence of the foreground, each colour scored by its nearest anchor."""
    raster = render.raster if isinstance(render, RenderResult) else render
    packed = _packed(raster).ravel()
    fg = packed[packed != WHITE]
    if fg.size == 0:
        raise MetricError("render has no foreground pixels")
    colors, counts = np.unique(fg, return_counts=True)
    rgb = np.stack([(colors >> 16) & 255, (colors >> 8) & 255, colors & 255], axis=1)
    valence = table.valence[table.nearest(rgb)]
    return float(np.dot(valence, counts) / counts.sum())


# -- saliency ---------------------------------------------------------------


@dataclass(frozen=True)
class SaliencyMap:
    grid: np.ndarray  # (height, width) in [0, 1]

    def __post_init__(self):
        if self.grid.ndim != 2 or not np.all(np.isfinite(self.grid)) or np.any(self.grid < 0):
            raise ValueError("saliency grid must be a finite, non-negative 2-D array")


class SaliencyProvider(Protocol):
    def __call__(self, render: RenderResult) -> SaliencyMap: ...


def _ring_means(raster: np.ndarray, boxes: Sequence[tuple[int, int, int, int]], ring: int):
    """Mean RGB of the ``ring``-pixel band around each box (box itself excluded)."""
    h, w = raster.shape[:2]
    out = []
    for x0, y0, x1, y1 in boxes:
        cx0, cy0 = min(max(x0, 0), w), min(max(y0, 0), h)
        cx1, cy1 = max(min(x1, w), cx0), max(min(y1, h), cy0)
        ox0, oy0 = max(x0 - ring, 0), max(y0 - ring, 0)
        ox1, oy1 = min(x1 + ring, w), min(y1 + ring, h)
        area = (ox1 - ox0) * (oy1 - oy0) - (cx1 - cx0) * (cy1 - cy0)
        if area <= 0:
            out.append(None)
            continue
        total = raster[oy0:oy1, ox0:ox1].sum(axis=(0, 1), dtype=np.int64)
        total = total - raster[cy0:cy1, cx0:cx1].sum(axis=(0, 1), dtype=np.int64)
        out.append(total / area)
    return out


def proxy_saliency(render: RenderResult, ring: int = SALIENCY_RING) -> SaliencyMap:
    """Contrast-based stand-in for a learned saliency model.

    Each element scores the L*a*b* distance between its fill and the mean
    colour of the surrounding ring; the map is constant on element boxes
    (overlaps keep the larger score), zero elsewhere, scaled to max 1.
    """
    h, w = render.height, render.width
    grid = np.zeros((h, w))
    elements = [e for e in render.elements if e.fill is not None and e.area > 0]
    means = _ring_means(render.raster, [e.bbox for e in elements], ring)
    fills = np.array([e.fill for e in elements], dtype=float).reshape(-1, 3)
    scores = np.zeros(len(elements))
    valid = [i for i, m in enumerate(means) if m is not None]
    if valid:
        ring_lab = srgb_to_lab(np.array([means[i] for i in valid]))
        scores[valid] = np.linalg.norm(srgb_to_lab(fills[valid]) - ring_lab, axis=1)
    for e, s in zip(elements, scores):
        x0, y0, x1, y1 = e.bbox
        sub = grid[max(y0, 0):max(min(y1, h), 0), max(x0, 0):max(min(x1, w), 0)]
        np.maximum(sub, s, out=sub)
    peak = grid.max()
    if peak > 0:
        grid /= peak
    return SaliencyMap(grid)


class ProxySaliency:
    """Default provider: :func:`proxy_saliency`."""

    def __init__(self, ring: int = SALIENCY_RING):
        self.ring = ring

    def __call__(self, render: RenderResult) -> SaliencyMap:
        return proxy_saliency(render, self.ring)


class FileSaliency:
    """Precomputed maps stored as ``<chart_id>.<task_id>.png`` greyscale images.

    Pixel values 0..255 map linearly onto 0..1; the image must match the
    render size exactly.
    """

    def __init__(self, directory, chart_id: str, task_id: str):
        self.path = Path(directory) / f"{chart_id}.{task_id}.png"

    def __call__(self, render: RenderResult) -> SaliencyMap:
        from PIL import Image

        if not self.path.exists():
            raise MetricError(f"saliency map not found: {self.path}")
        with Image.open(self.path) as im:
            grid = np.asarray(im.convert("L"), dtype=float) / 255.0
        if grid.shape != (render.height, render.width):
            raise MetricError(
                f"saliency map {self.path.name} is {grid.shape[1]}x{grid.shape[0]}, "
                f"render is {render.width}x{render.height}"
            )
        return SaliencyMap(grid)


def task_saliency(smap: SaliencyMap, aois: Sequence[tuple[int, int, int, int]]) -> tuple[float, bool]:
    """Mean saliency over the union of AOI pixels, ignoring exact zeros.

    Returns ``(score, degenerate)``; ``degenerate`` is True when every AOI
    pixel is zero, in which case the score is 0.
    """
    if not aois:
        raise MetricError("no areas of interest")
    h, w = smap.grid.shape
    mask = np.zeros((h, w), dtype=bool)
    for x0, y0, x1, y1 in aois:
        if x0 < 0 or y0 < 0 or x1 > w or y1 > h or x1 < x0 or y1 < y0:
            raise MetricError(f"AOI {(x0, y0, x1, y1)} outside the {w}x{h} map")
        mask[y0:y1, x0:x1] = True
    values = smap.grid[mask]
    values = values[values != 0]
    if values.size == 0:
        return 0.0, True
    return float(values.mean()), False


# -- text legibility --------------------------------------------------------


def _overlaps(boxes: np.ndarray) -> np.ndarray:
    """For each box, whether its interior intersects any other box."""
    x0, y0, x1, y1 = (boxes[:, i] for i in range(4))
    hit = (
        (x0[:, None] < x1[None, :])
        & (x0[None, :] < x1[:, None])
        & (y0[:, None] < y1[None, :])
        & (y0[None, :] < y1[:, None])
    )
    np.fill_diagonal(hit, False)
    return hit.any(axis=1)


def label_detected(level: PyramidLevel, threshold: float = LEGIBILITY_THRESHOLD) -> np.ndarray:
    """Per-label detection at one pyramid level (boolean array)."""
    boxes = np.array([b for b, _ in level.labels], dtype=float).reshape(-1, 4)
    glyph = np.array([g for _, g in level.labels], dtype=float)
    cw, ch = level.canvas
    tol = 1e-9
    inside = (boxes[:, 0] >= -tol) & (boxes[:, 1] >= -tol) & (boxes[:, 2] <= cw + tol) & (boxes[:, 3] <= ch + tol)
    return (glyph >= threshold) & inside & ~_overlaps(boxes)


def text_legibility(
    render: RenderResult, levels: Sequence[PyramidLevel], threshold: float = LEGIBILITY_THRESHOLD
) -> float:
    """Fraction of (level, label) pairs whose label would be read at that level.

    A label counts at a level when its scaled cap-height reaches ``threshold``
    pixels, its scaled box lies inside the scaled canvas and it overlaps no
    other label.
    """
    m = len(render.labels())
    if m == 0:
        raise MetricError("text legibility is undefined for a chart without labels")
    if not levels:
        raise MetricError("no pyramid levels")
    hits = sum(int(label_detected(level, threshold).sum()) for level in levels)
    return hits / (len(levels) * m)

