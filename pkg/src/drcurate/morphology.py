"""Binary and grayscale morphology, connected components, windowed stats.

Each per-pixel loop has a numba-jitted implementation and a vectorized
fallback; both produce identical outputs (see ``benchmarks/``). For the
window sums the jitted loop wins and is selected via
:func:`drcurate.accel.using_numba`; for morphology and labeling the
vectorized shifted-array reductions measure faster than the naive loops,
so they are the production path in both modes and the loops remain as
benchmark subjects and definitional oracles. Structuring elements are
discrete disks ``{(dy, dx) : dy^2 + dx^2 <= r^2}``; pixels outside the
image count as background (erosion pad 255 / dilation pad 0 in gray).
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from . import accel
from .core import DimensionMismatchError


def disk_offsets(radius: int) -> tuple[np.ndarray, np.ndarray]:
    """(dy, dx) offset arrays of the disk structuring element."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    r = int(radius)
    dys, dxs = [], []
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dy * dy + dx * dx <= r * r:
                dys.append(dy)
                dxs.append(dx)
    return np.asarray(dys, dtype=np.int64), np.asarray(dxs, dtype=np.int64)


# ---------------------------------------------------------------------------
# Binary morphology
# ---------------------------------------------------------------------------

def _binary_erode_loop(mask, dys, dxs):
    h, w = mask.shape
    out = np.zeros_like(mask)
    k = dys.shape[0]
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            ok = True
            for i in range(k):
                yy = y + dys[i]
                xx = x + dxs[i]
                if yy < 0 or yy >= h or xx < 0 or xx >= w:
                    ok = False
                    break
                if not mask[yy, xx]:
                    ok = False
                    break
            if ok:
                out[y, x] = True
    return out


def _binary_dilate_loop(mask, dys, dxs):
    h, w = mask.shape
    out = np.zeros_like(mask)
    k = dys.shape[0]
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            for i in range(k):
                yy = y + dys[i]
                xx = x + dxs[i]
                if 0 <= yy and yy < h and 0 <= xx and xx < w:
                    out[yy, xx] = True
    return out


_binary_erode_jit = accel.maybe_jit(_binary_erode_loop)
_binary_dilate_jit = accel.maybe_jit(_binary_dilate_loop)


def _shifted(view: np.ndarray, dy: int, dx: int, pad: bool) -> np.ndarray:
    """View of ``view`` shifted by (-dy, -dx) with constant padding."""
    h, w = view.shape
    out = np.full((h, w), pad, dtype=view.dtype)
    ys = slice(max(0, dy), min(h, h + dy))
    xs = slice(max(0, dx), min(w, w + dx))
    yd = slice(max(0, -dy), min(h, h - dy))
    xd = slice(max(0, -dx), min(w, w - dx))
    out[yd, xd] = view[ys, xs]
    return out


def _binary_erode_numpy(mask, dys, dxs):
    out = np.ones_like(mask)
    for dy, dx in zip(dys, dxs):
        out &= _shifted(mask, int(dy), int(dx), False)
    return out & mask


def _binary_dilate_numpy(mask, dys, dxs):
    out = np.zeros_like(mask)
    for dy, dx in zip(dys, dxs):
        out |= _shifted(mask, int(-dy), int(-dx), False)
    return out


def binary_erode(mask: np.ndarray, radius: int) -> np.ndarray:
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    if radius == 0:
        return mask.copy()
    dys, dxs = disk_offsets(radius)
    return _binary_erode_numpy(mask, dys, dxs)


def binary_dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    if radius == 0:
        return mask.copy()
    dys, dxs = disk_offsets(radius)
    return _binary_dilate_numpy(mask, dys, dxs)


def binary_open(mask: np.ndarray, radius: int) -> np.ndarray:
    """Erosion then dilation with the same disk; radius 0 is the identity."""
    if radius == 0:
        return np.ascontiguousarray(mask, dtype=np.bool_).copy()
    return binary_dilate(binary_erode(mask, radius), radius)


# ---------------------------------------------------------------------------
# Grayscale morphology (for the white top-hat)
# ---------------------------------------------------------------------------

def _gray_morph_loop(img, dys, dxs, erode):
    h, w = img.shape
    out = np.empty_like(img)
    k = dys.shape[0]
    for y in range(h):
        for x in range(w):
            best = np.uint8(255) if erode else np.uint8(0)
            for i in range(k):
                yy = y + dys[i]
                xx = x + dxs[i]
                if yy < 0 or yy >= h or xx < 0 or xx >= w:
                    continue
                v = img[yy, xx]
                if erode:
                    if v < best:
                        best = v
                else:
                    if v > best:
                        best = v
            out[y, x] = best
    return out


_gray_morph_jit = accel.maybe_jit(_gray_morph_loop)


def _gray_morph_numpy(img, dys, dxs, erode):
    pad = np.uint8(255) if erode else np.uint8(0)
    acc = None
    for dy, dx in zip(dys, dxs):
        view = _shifted(img, int(dy), int(dx), pad)
        if acc is None:
            acc = view
        else:
            acc = np.minimum(acc, view) if erode else np.maximum(acc, view)
    return acc


def gray_erode(img: np.ndarray, radius: int) -> np.ndarray:
    img = np.ascontiguousarray(img, dtype=np.uint8)
    if radius == 0:
        return img.copy()
    dys, dxs = disk_offsets(radius)
    return _gray_morph_numpy(img, dys, dxs, True)


def gray_dilate(img: np.ndarray, radius: int) -> np.ndarray:
    img = np.ascontiguousarray(img, dtype=np.uint8)
    if radius == 0:
        return img.copy()
    dys, dxs = disk_offsets(radius)
    return _gray_morph_numpy(img, dys, dxs, False)


def white_tophat(img: np.ndarray, radius: int) -> np.ndarray:
    """Image minus its grayscale opening; emphasizes small bright detail."""
    opened = gray_dilate(gray_erode(img, radius), radius)
    return (img.astype(np.int16) - opened.astype(np.int16)).clip(0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# Connected components (8-connectivity)
# ---------------------------------------------------------------------------

def _label_loop(mask):
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    stack_y = np.empty(h * w, dtype=np.int32)
    stack_x = np.empty(h * w, dtype=np.int32)
    current = 0
    for y in range(h):
        for x in range(w):
            if mask[y, x] and labels[y, x] == 0:
                current += 1
                labels[y, x] = current
                stack_y[0] = y
                stack_x[0] = x
                top = 1
                while top > 0:
                    top -= 1
                    cy = stack_y[top]
                    cx = stack_x[top]
                    for dy in range(-1, 2):
                        for dx in range(-1, 2):
                            ny = cy + dy
                            nx = cx + dx
                            if ny < 0 or ny >= h or nx < 0 or nx >= w:
                                continue
                            if mask[ny, nx] and labels[ny, nx] == 0:
                                labels[ny, nx] = current
                                stack_y[top] = ny
                                stack_x[top] = nx
                                top += 1
    return labels, current


_label_jit = accel.maybe_jit(_label_loop)


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labels (int32, 0 = background) and count.

    scipy's two-pass labeler measures faster than the BFS loop, so it is
    the production path; label numbering may differ between the two, but
    area-based removal is numbering-invariant.
    """
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    return labels.astype(np.int32), int(n)


def remove_small_components(mask: np.ndarray, min_area: int) -> np.ndarray:
    """Drop 8-connected components with area < ``min_area``."""
    if min_area < 1:
        raise ValueError("min_area must be >= 1")
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    if min_area == 1 or not mask.any():
        return mask.copy()
    labels, n = label_components(mask)
    if n == 0:
        return mask.copy()
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    keep = areas >= min_area
    keep[0] = False
    return keep[labels]


# ---------------------------------------------------------------------------
# Local mean / std over a square window with border replication
# ---------------------------------------------------------------------------

def _integral(padded: np.ndarray) -> np.ndarray:
    h, w = padded.shape
    ii = np.zeros((h + 1, w + 1), dtype=np.float64)
    ii[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    return ii


def _window_sums_loop(ii, win):
    h = ii.shape[0] - 1 - win + 1
    w = ii.shape[1] - 1 - win + 1
    out = np.empty((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            out[y, x] = ii[y + win, x + win] - ii[y, x + win] - ii[y + win, x] + ii[y, x]
    return out


_window_sums_jit = accel.maybe_jit(_window_sums_loop)


def _window_sums_numpy(ii, win):
    return ii[win:, win:] - ii[:-win, win:] - ii[win:, :-win] + ii[:-win, :-win]


def local_mean_std(values: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel mean and standard deviation over a window x window square.

    The window is always full thanks to edge replication, so every pixel's
    statistics cover exactly ``window**2`` samples.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise DimensionMismatchError("local statistics expect a 2-D array")
    r = window // 2
    padded = np.pad(values, r, mode="edge")
    ii1 = _integral(padded)
    ii2 = _integral(padded * padded)
    if accel.using_numba():
        s1 = _window_sums_jit(ii1, window)
        s2 = _window_sums_jit(ii2, window)
    else:
        s1 = _window_sums_numpy(ii1, window)
        s2 = _window_sums_numpy(ii2, window)
    n = float(window * window)
    mean = s1 / n
    var = np.maximum(s2 / n - mean * mean, 0.0)
    return mean, np.sqrt(var)
