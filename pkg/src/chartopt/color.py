"""Colour conversions shared by the renderer and the metrics.

sRGB (8 bit) -> CIE 1976 L*a*b* under D65 / 2 degree observer, plus HSV
helpers for the design parameters.
"""

from __future__ import annotations

import colorsys

import numpy as np

# D65 reference white, Y normalised to 1
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])

_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)

_EPS = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0


def hex_to_rgb(code: str) -> tuple[int, int, int]:
    code = code.strip().lstrip("#")
    if len(code) != 6:
        raise ValueError(f"expected a 6-digit hex colour, got {code!r}")
    return int(code[0:2], 16), int(code[2:4], 16), int(code[4:6], 16)


def rgb_to_hsv(rgb: tuple[int, int, int]) -> tuple[float, float, float]:
    """8-bit RGB -> (hue in degrees [0, 360), saturation, value)."""
    h, s, v = colorsys.rgb_to_hsv(*(c / 255.0 for c in rgb))
    return (h * 360.0) % 360.0, s, v


def hex_to_hsv(code: str) -> tuple[float, float, float]:
    return rgb_to_hsv(hex_to_rgb(code))


def hsv_to_rgb(hsv: tuple[float, float, float]) -> tuple[int, int, int]:
    h, s, v = hsv
    r, g, b = colorsys.hsv_to_rgb((h % 360.0) / 360.0, s, v)
    return int(round(r * 255)), int(round(g * 255)), int(round(b * 255))


def rgb_to_hex(rgb: tuple[int, int, int]) -> str:
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def srgb_to_lab(rgb) -> np.ndarray:
    """Convert sRGB values in [0, 255] (any leading shape, last axis = 3) to L*a*b*."""
    c = np.asarray(rgb, dtype=float) / 255.0
    lin = np.where(c > 0.04045, ((c + 0.055) / 1.055) ** 2.4, c / 12.92)
    xyz = lin @ _SRGB_TO_XYZ.T
    t = xyz / _WHITE_D65
    f = np.where(t > _EPS, np.cbrt(t), (_KAPPA * t + 16.0) / 116.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def delta_e(rgb1, rgb2) -> np.ndarray:
    """CIE76 colour difference between sRGB colours."""
    return np.linalg.norm(srgb_to_lab(rgb1) - srgb_to_lab(rgb2), axis=-1)
