"""Color conversions used across the pipeline.

Grayscale uses ITU-R 601 luma. HSV follows the hexcone model with hue in
degrees [0, 360); LAB is CIE L*a*b* under sRGB primaries and the D65 white
point. All conversions are vectorized float64 and invert to within one
8-bit level.
"""

from __future__ import annotations

import numpy as np

from .core import RasterImage

# sRGB (linear) -> XYZ, D65
_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ2RGB = np.linalg.inv(_RGB2XYZ)
_D65 = np.array([0.95047, 1.0, 1.08883])


def luma(img: RasterImage | np.ndarray) -> np.ndarray:
    """ITU-R 601 grayscale as float64 (no re-quantization)."""
    px = img.pixels if isinstance(img, RasterImage) else np.asarray(img)
    if px.ndim == 2:
        return px.astype(np.float64)
    r, g, b = px[..., 0].astype(np.float64), px[..., 1].astype(np.float64), px[..., 2].astype(np.float64)
    return 0.299 * r + 0.587 * g + 0.114 * b


def green_channel(img: RasterImage) -> np.ndarray:
    """Green channel for RGB input, the sole channel otherwise (uint8)."""
    if img.channels == 1:
        return img.pixels
    return img.pixels[..., 1]


def rgb_to_hsv(px: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """uint8 RGB -> (hue degrees [0,360), saturation [0,1], value [0,1])."""
    rgb = np.asarray(px, dtype=np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = np.max(rgb, axis=-1)
    mn = np.min(rgb, axis=-1)
    c = v - mn
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)
    h = np.zeros_like(v)
    nz = c > 0
    rmax = nz & (v == r)
    gmax = nz & (v == g) & ~rmax
    bmax = nz & ~rmax & ~gmax
    cc = np.where(nz, c, 1.0)
    h[rmax] = ((g - b)[rmax] / cc[rmax]) % 6.0
    h[gmax] = (b - r)[gmax] / cc[gmax] + 2.0
    h[bmax] = (r - g)[bmax] / cc[bmax] + 4.0
    return (h * 60.0) % 360.0, s, v


def hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_hsv`, back to uint8 RGB."""
    h = np.asarray(h, dtype=np.float64) % 360.0
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    c = v * s
    hp = h / 60.0
    x = c * (1.0 - np.abs(hp % 2.0 - 1.0))
    z = np.zeros_like(c)
    sector = np.floor(hp).astype(int) % 6
    r = np.select([sector == 0, sector == 1, sector == 2, sector == 3, sector == 4, sector == 5],
                  [c, x, z, z, x, c])
    g = np.select([sector == 0, sector == 1, sector == 2, sector == 3, sector == 4, sector == 5],
                  [x, c, c, x, z, z])
    b = np.select([sector == 0, sector == 1, sector == 2, sector == 3, sector == 4, sector == 5],
                  [z, z, x, c, c, x])
    m = v - c
    rgb = np.stack([r + m, g + m, b + m], axis=-1)
    return np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8)


def _srgb_to_linear(u: np.ndarray) -> np.ndarray:
    return np.where(u <= 0.04045, u / 12.92, ((u + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return np.where(u <= 0.0031308, u * 12.92, 1.055 * u ** (1.0 / 2.4) - 0.055)


def _lab_f(t: np.ndarray) -> np.ndarray:
    d = 6.0 / 29.0
    return np.where(t > d**3, np.cbrt(t), t / (3 * d * d) + 4.0 / 29.0)


def _lab_finv(t: np.ndarray) -> np.ndarray:
    d = 6.0 / 29.0
    return np.where(t > d, t**3, 3 * d * d * (t - 4.0 / 29.0))


def rgb_to_lab(px: np.ndarray) -> np.ndarray:
    """uint8 RGB -> float64 (..., 3) L*a*b*, L in [0, 100]."""
    rgb = _srgb_to_linear(np.asarray(px, dtype=np.float64) / 255.0)
    xyz = rgb @ _RGB2XYZ.T
    fx, fy, fz = (_lab_f(xyz[..., i] / _D65[i]) for i in range(3))
    lab = np.empty(rgb.shape, dtype=np.float64)
    lab[..., 0] = 116.0 * fy - 16.0
    lab[..., 1] = 500.0 * (fx - fy)
    lab[..., 2] = 200.0 * (fy - fz)
    return lab


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_lab`, back to uint8 RGB."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_lab_finv(fx) * _D65[0], _lab_finv(fy) * _D65[1], _lab_finv(fz) * _D65[2]], axis=-1)
    rgb = _linear_to_srgb(xyz @ _XYZ2RGB.T)
    return np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8)
