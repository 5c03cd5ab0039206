"""Lesion-visibility enhancement: margin crop, CLAHE on L, gamma correction.

CLAHE clips each tile's 256-bin histogram at ``clip`` times the uniform bin
height and redistributes the excess uniformly (iterated to its fixed point,
so ``clip=1`` flattens histograms exactly); tile mappings are blended
bilinearly between tile centers. ``clip=inf`` with a 1x1 grid degenerates
to plain histogram equalization. Gamma below 1 brightens, compensating the
brightness loss CLAHE tends to introduce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import accel
from .colorspace import lab_to_rgb, rgb_to_lab
from .core import CurationError, RasterImage
from .features import CropBox, crop_black_margins


class EnhanceError(CurationError):
    pass


@dataclass(frozen=True)
class EnhancementParams:
    clahe_clip: float | None = 3.0  # None disables CLAHE entirely
    tile_grid: tuple[int, int] = (8, 8)  # (cols, rows)
    gamma: float = 0.8
    dark_threshold: int = 15

    def __post_init__(self):
        if self.clahe_clip is not None and self.clahe_clip < 1.0:
            raise ValueError("clahe_clip must be >= 1.0 (or None to disable)")
        if self.tile_grid[0] < 1 or self.tile_grid[1] < 1:
            raise ValueError("tile_grid dims must be >= 1")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")


def _tile_bounds(dim: int, n: int) -> np.ndarray:
    return np.round(np.linspace(0, dim, n + 1)).astype(np.int64)


def _waterfill_clip(hist: np.ndarray, limit: float) -> np.ndarray:
    """Clip at ``limit`` and redistribute the excess uniformly, to fixpoint.

    Solves sum(min(h_i + c, limit)) = sum(h_i) for c >= 0, the limit of
    repeatedly clipping and spreading the excess over all 256 bins.
    """
    total = hist.sum()
    if not math.isfinite(limit):
        return hist.astype(np.float64)
    if (hist > limit).sum() == 0:
        return hist.astype(np.float64)
    if 256.0 * limit <= total:  # only reachable at clip == 1: fully flat
        return np.full(256, total / 256.0)
    lo, hi = 0.0, limit
    for _ in range(64):
        c = (lo + hi) / 2.0
        if np.minimum(hist + c, limit).sum() < total:
            lo = c
        else:
            hi = c
    return np.minimum(hist + (lo + hi) / 2.0, limit)


def _tile_mapping(tile: np.ndarray, clip: float) -> np.ndarray:
    """256-entry intensity mapping for one tile (float64 holding ints)."""
    tp = tile.size
    hist = np.bincount(tile.ravel(), minlength=256).astype(np.float64)
    limit = math.inf if not math.isfinite(clip) else clip * tp / 256.0
    hist = _waterfill_clip(hist, limit)
    cdf = np.cumsum(hist)
    nz = np.flatnonzero(hist > 0)
    cdf_min = cdf[nz[0]] if nz.size else float(tp)
    denom = tp - cdf_min
    if denom <= 0:  # constant tile under plain equalization: all to 0
        return np.zeros(256, dtype=np.float64)
    m = np.round(255.0 * (cdf - cdf_min) / denom)
    return np.clip(m, 0.0, 255.0)


def _interp_axis(dim: int, bounds: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-pixel (lower tile, upper tile, weight) along one axis."""
    centers = (bounds[:-1] + bounds[1:] - 1) / 2.0
    n = centers.size
    pos = np.arange(dim, dtype=np.float64)
    i0 = np.clip(np.searchsorted(centers, pos, side="right") - 1, 0, max(n - 2, 0))
    i1 = np.minimum(i0 + 1, n - 1)
    span = centers[i1] - centers[i0]
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(span > 0, (pos - centers[i0]) / np.where(span > 0, span, 1.0), 0.0)
    return i0.astype(np.int64), i1.astype(np.int64), np.clip(w, 0.0, 1.0)


def _clahe_apply_loop(img, maps, r0, r1, wy, c0, c1, wx):
    h, w = img.shape
    out = np.empty((h, w), dtype=np.uint8)
    for y in range(h):
        ra = r0[y]
        rb = r1[y]
        fy = wy[y]
        for x in range(w):
            v = img[y, x]
            fx = wx[x]
            val = (
                (1.0 - fy) * (1.0 - fx) * maps[ra, c0[x], v]
                + (1.0 - fy) * fx * maps[ra, c1[x], v]
                + fy * (1.0 - fx) * maps[rb, c0[x], v]
                + fy * fx * maps[rb, c1[x], v]
            )
            out[y, x] = np.uint8(math.floor(val + 0.5))
    return out


_clahe_apply_jit = accel.maybe_jit(_clahe_apply_loop)


def _clahe_apply_numpy(img, maps, r0, r1, wy, c0, c1, wx):
    v = img
    ra = r0[:, None]
    rb = r1[:, None]
    ca = c0[None, :]
    cb = c1[None, :]
    fy = wy[:, None]
    fx = wx[None, :]
    val = (
        (1.0 - fy) * (1.0 - fx) * maps[ra, ca, v]
        + (1.0 - fy) * fx * maps[ra, cb, v]
        + fy * (1.0 - fx) * maps[rb, ca, v]
        + fy * fx * maps[rb, cb, v]
    )
    return np.floor(val + 0.5).astype(np.uint8)


def clahe_array(arr: np.ndarray, clip: float = 3.0, grid: tuple[int, int] = (8, 8)) -> np.ndarray:
    """CLAHE on a 2-D uint8 array; ``grid`` is (cols, rows)."""
    arr = np.ascontiguousarray(arr, dtype=np.uint8)
    cols, rows = grid
    h, w = arr.shape
    if h < rows or w < cols:
        raise EnhanceError(f"image {w}x{h} smaller than tile grid {cols}x{rows}")
    xb = _tile_bounds(w, cols)
    yb = _tile_bounds(h, rows)
    if ((np.diff(yb)[:, None] * np.diff(xb)[None, :]) < 4).any():
        raise EnhanceError("degenerate CLAHE tiles (fewer than 4 pixels)")
    maps = np.empty((rows, cols, 256), dtype=np.float64)
    for r in range(rows):
        for c in range(cols):
            tile = arr[yb[r] : yb[r + 1], xb[c] : xb[c + 1]]
            maps[r, c] = _tile_mapping(tile, clip)
    r0, r1, wy = _interp_axis(h, yb)
    c0, c1, wx = _interp_axis(w, xb)
    if accel.using_numba():
        return _clahe_apply_jit(arr, maps, r0, r1, wy, c0, c1, wx)
    return _clahe_apply_numpy(arr, maps, r0, r1, wy, c0, c1, wx)


def clahe(channel: RasterImage, clip: float = 3.0, grid: tuple[int, int] = (8, 8)) -> RasterImage:
    if channel.channels != 1:
        raise EnhanceError("clahe expects a grayscale image")
    return RasterImage(clahe_array(channel.pixels, clip, grid))


def gamma_lut(gamma: float) -> np.ndarray:
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    v = np.arange(256, dtype=np.float64)
    return np.clip(np.round(255.0 * (v / 255.0) ** gamma), 0, 255).astype(np.uint8)


def gamma_correct(channel: RasterImage | np.ndarray, gamma: float) -> RasterImage | np.ndarray:
    """out = round(255 * (in/255)^gamma); monotone, fixes 0 and 255."""
    lut = gamma_lut(gamma)
    if isinstance(channel, RasterImage):
        return RasterImage(lut[channel.pixels])
    return lut[np.asarray(channel, dtype=np.uint8)]


def enhance(img: RasterImage, params: EnhancementParams = EnhancementParams()) -> tuple[RasterImage, CropBox]:
    """Crop black margins, equalize L of LAB with CLAHE, gamma-correct RGB.

    Output dimensions equal the crop dimensions; the crop box is returned
    alongside (degenerate when the frame had no bright pixel).
    """
    if not img.is_rgb:
        raise EnhanceError("enhance expects an RGB image")
    cropped, box = crop_black_margins(img, params.dark_threshold)
    lab = rgb_to_lab(cropped.pixels)
    if params.clahe_clip is not None:
        lq = np.clip(np.round(lab[..., 0] * (255.0 / 100.0)), 0, 255).astype(np.uint8)
        lq = clahe_array(lq, params.clahe_clip, params.tile_grid)
        lab[..., 0] = lq.astype(np.float64) * (100.0 / 255.0)
    rgb = lab_to_rgb(lab)
    return RasterImage(gamma_correct(rgb, params.gamma)), box
