"""Filters that tighten machine-predicted lesion masks before review.

Hard-exudate candidates must outshine their neighborhood in HSV value and
look whitish-to-yellowish (low saturation or yellow hue); hemorrhage and
microaneurysm candidates must sit below their neighborhood, with
morphological opening knocking out speckle. Soft exudates bypass
post-processing (they are cohesive enough already). Every filter is
contractive: output foreground is a subset of the input mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .colorspace import rgb_to_hsv
from .core import DimensionMismatchError, LesionMask, LesionType, RasterImage
from .morphology import binary_open, local_mean_std, remove_small_components

# strict local-contrast comparisons, with a guard so float rounding in the
# windowed mean cannot admit pixels of a perfectly flat region (sigma = 0)
_EPS = 1e-9


@dataclass(frozen=True)
class PostprocessParams:
    window: int = 25  # odd; local-statistics square
    k_bright: float = 1.0
    k_dark: float = 1.0
    hue_range: tuple[float, float] = (20.0, 80.0)  # degrees, EX yellows
    sat_max: float = 0.6
    open_radius_ma: int = 1
    open_radius_ha: int = 2
    min_area: int = 5

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be odd and >= 3")
        if self.open_radius_ma < 0 or self.open_radius_ha < 0:
            raise ValueError("opening radii must be >= 0")
        if not (0.0 <= self.hue_range[0] < 360.0 and 0.0 <= self.hue_range[1] < 360.0):
            raise ValueError("hue_range must lie within [0, 360)")
        if self.min_area < 1:
            raise ValueError("min_area must be >= 1")

    def open_radius(self, lesion: LesionType) -> int:
        return self.open_radius_ma if lesion == LesionType.MA else self.open_radius_ha


def _check_dims(img: RasterImage, mask: LesionMask) -> None:
    if (img.height, img.width) != (mask.height, mask.width):
        raise DimensionMismatchError(
            f"mask {mask.width}x{mask.height} does not match image {img.width}x{img.height}"
        )


def _hsv(img: RasterImage):
    if img.is_rgb:
        return rgb_to_hsv(img.pixels)
    v = img.pixels.astype(np.float64) / 255.0
    return np.zeros_like(v), np.zeros_like(v), v


def _hue_in_range(h: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if lo <= hi:
        return (h >= lo) & (h <= hi)
    return (h >= lo) | (h <= hi)  # wrap-around range


def filter_ex(img: RasterImage, mask: LesionMask, params: PostprocessParams = PostprocessParams()) -> LesionMask:
    """Keep bright, whitish-to-yellowish exudate candidates.

    A predicted pixel survives iff V exceeds local mean + k*std and it is
    either low-saturation or yellow-hued; tiny leftovers are dropped. On a
    flat region (std 0, V = mean) nothing survives.
    """
    _check_dims(img, mask)
    h, s, v = _hsv(img)
    mean, std = local_mean_std(v, params.window)
    color_ok = (s <= params.sat_max) | _hue_in_range(h, *params.hue_range)
    keep = mask.grid & (v > mean + params.k_bright * std + _EPS) & color_ok
    return LesionMask(mask.lesion, remove_small_components(keep, params.min_area))


def filter_dark(
    img: RasterImage,
    mask: LesionMask,
    lesion: LesionType,
    params: PostprocessParams = PostprocessParams(),
) -> LesionMask:
    """Keep locally dark candidates (HA/MA), opened and de-speckled."""
    if lesion not in (LesionType.HA, LesionType.MA):
        raise ValueError("filter_dark applies to HA or MA only")
    _check_dims(img, mask)
    _, _, v = _hsv(img)
    mean, std = local_mean_std(v, params.window)
    keep = mask.grid & (v < mean - params.k_dark * std - _EPS)
    keep = binary_open(keep, params.open_radius(lesion))
    return LesionMask(mask.lesion, remove_small_components(keep, params.min_area))


def morphological_open(mask: LesionMask, radius: int) -> LesionMask:
    """Binary opening with a disk; radius 0 is the identity."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    return LesionMask(mask.lesion, binary_open(mask.grid, radius))


def postprocess_mask(
    img: RasterImage,
    mask: LesionMask,
    params: PostprocessParams = PostprocessParams(),
) -> LesionMask:
    """Dispatch by lesion type; SE masks pass through untouched."""
    if mask.lesion == LesionType.EX:
        return filter_ex(img, mask, params)
    if mask.lesion in (LesionType.HA, LesionType.MA):
        return filter_dark(img, mask, mask.lesion, params)
    return mask
