"""Handcrafted image-quality features plus ingested VLM contrastive scores.

The feature vector that feeds the quality classifier: mean brightness,
top-hat+Frangi vesselness, Sobel sharpness, histogram entropy, peak-to-mean
ratio, and (when a sidecar provides them) the contrastive "blurry" and
"artifacts" probabilities of a vision-language model. Running the VLM
itself is out of scope; its scores arrive via ``vlm_scores.json``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import accel
from .colorspace import luma
from .core import CurationError, RasterImage, atomic_write_text
from .vesselness import vesselness

FEATURE_NAMES = ("brightness", "vesselness", "sharpness", "entropy", "peak_to_mean", "blurry", "artifacts")
CSV_HEADER = ("image_id",) + FEATURE_NAMES + ("label",)


class FeatureError(CurationError):
    pass


@dataclass(frozen=True)
class CropBox:
    """Region retained after black-margin removal."""

    left: int
    top: int
    width: int
    height: int
    degenerate: bool = False

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("crop box must be at least 1x1")


@dataclass(frozen=True)
class FeatureConfig:
    dark_threshold: int = 15
    under_threshold: float = 50.0
    over_threshold: float = 180.0
    tophat_radius: int = 8
    vessel_scales: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0)
    frangi_beta: float = 0.5

    def __post_init__(self):
        if not 0 <= self.dark_threshold <= 255:
            raise ValueError("dark_threshold must be in [0, 255]")
        if not self.under_threshold < self.over_threshold:
            raise ValueError("under threshold must be below over threshold")


@dataclass(frozen=True)
class QualityFeatures:
    brightness: float
    vesselness: float
    sharpness: float
    entropy: float
    peak_to_mean: float
    blurry: float | None = None
    artifacts: float | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if (self.blurry is None) != (self.artifacts is None):
            raise ValueError("blurry and artifacts must be present together or not at all")

    def as_row(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in FEATURE_NAMES}


def crop_black_margins(img: RasterImage, dark_threshold: int = 15) -> tuple[RasterImage, CropBox]:
    """Minimal bounding box of pixels brighter than ``dark_threshold``.

    Brightness is the max over channels. If nothing qualifies the full
    frame comes back with the degenerate flag set.
    """
    if not 0 <= dark_threshold <= 255:
        raise ValueError("dark_threshold must be in [0, 255]")
    px = img.pixels
    bright = px > dark_threshold if px.ndim == 2 else (px > dark_threshold).any(axis=2)
    rows = np.flatnonzero(bright.any(axis=1))
    cols = np.flatnonzero(bright.any(axis=0))
    if rows.size == 0:
        return img, CropBox(0, 0, img.width, img.height, degenerate=True)
    top, bottom = int(rows[0]), int(rows[-1])
    left, right = int(cols[0]), int(cols[-1])
    box = CropBox(left, top, right - left + 1, bottom - top + 1)
    cropped = RasterImage(np.ascontiguousarray(px[top : bottom + 1, left : right + 1]))
    return cropped, box


def brightness(img: RasterImage) -> float:
    """Arithmetic mean of the grayscale conversion."""
    return float(luma(img).mean())


def exposure_verdict(b: float, under: float = 50.0, over: float = 180.0) -> str:
    """'under' | 'ok' | 'over' against the exposure thresholds."""
    if not under < over:
        raise ValueError("under threshold must be below over threshold")
    if b < under:
        return "under"
    if b > over:
        return "over"
    return "ok"


def _sobel_sum_loop(gray):
    # paired differences so constant inputs cancel exactly
    h, w = gray.shape
    acc = 0.0
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            gx = (
                (gray[y - 1, x + 1] - gray[y - 1, x - 1])
                + 2.0 * (gray[y, x + 1] - gray[y, x - 1])
                + (gray[y + 1, x + 1] - gray[y + 1, x - 1])
            )
            gy = (
                (gray[y + 1, x - 1] - gray[y - 1, x - 1])
                + 2.0 * (gray[y + 1, x] - gray[y - 1, x])
                + (gray[y + 1, x + 1] - gray[y - 1, x + 1])
            )
            acc += math.sqrt(gx * gx + gy * gy)
    return acc


_sobel_sum_jit = accel.maybe_jit(_sobel_sum_loop)


def _sobel_sum_numpy(gray):
    gx = (
        (gray[:-2, 2:] - gray[:-2, :-2])
        + 2.0 * (gray[1:-1, 2:] - gray[1:-1, :-2])
        + (gray[2:, 2:] - gray[2:, :-2])
    )
    gy = (
        (gray[2:, :-2] - gray[:-2, :-2])
        + 2.0 * (gray[2:, 1:-1] - gray[:-2, 1:-1])
        + (gray[2:, 2:] - gray[:-2, 2:])
    )
    return float(np.sqrt(gx * gx + gy * gy).sum())


def sharpness(img: RasterImage) -> float:
    """Mean Euclidean norm of the 3x3 Sobel gradient, borders excluded."""
    if img.height < 3 or img.width < 3:
        raise FeatureError("sharpness needs an image of at least 3x3 pixels")
    gray = luma(img)
    n = (img.height - 2) * (img.width - 2)
    if accel.using_numba():
        total = _sobel_sum_jit(gray)
    else:
        total = _sobel_sum_numpy(gray)
    return total / n


def entropy(img: RasterImage) -> float:
    """Shannon entropy (bits) of the 256-bin grayscale histogram."""
    gray = luma(img)
    hist, _ = np.histogram(gray, bins=256, range=(0.0, 256.0))
    p = hist[hist > 0] / gray.size
    return float(-(p * np.log2(p)).sum())


def peak_to_mean(img: RasterImage) -> float:
    """Max grayscale intensity over mean; NaN for the all-zero image."""
    gray = luma(img)
    mean = gray.mean()
    if mean == 0.0:
        return math.nan
    return float(gray.max() / mean)


def ingest_vlm_scores(path: str | Path) -> dict[str, tuple[float, float]]:
    """Read the VLM sidecar: ``{"<image_id>": {"blurry": p, "artifacts": p}}``.

    Scores are probabilities of the degraded prompt (higher = worse) and are
    passed through verbatim. An empty file maps to an empty dict.
    """
    text = Path(path).read_text().strip()
    if not text:
        return {}
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FeatureError(f"VLM sidecar is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FeatureError("VLM sidecar must be a JSON object keyed by image_id")
    out: dict[str, tuple[float, float]] = {}
    for image_id, rec in doc.items():
        for key in ("blurry", "artifacts"):
            if not isinstance(rec, dict) or key not in rec:
                raise FeatureError(f"VLM sidecar entry {image_id!r} missing field {key!r}")
            v = rec[key]
            if not isinstance(v, (int, float)) or not 0.0 <= float(v) <= 1.0:
                raise FeatureError(f"VLM score {key}={v!r} for {image_id!r} outside [0, 1]")
        out[image_id] = (float(rec["blurry"]), float(rec["artifacts"]))
    return out


def extract_features(
    img: RasterImage,
    config: FeatureConfig = FeatureConfig(),
    vlm: tuple[float, float] | None = None,
) -> QualityFeatures:
    """Crop the black margins once and compute every feature on the crop.

    The VLM fields are populated iff ``vlm`` scores are given. Degenerate
    inputs (all-dark frame, zero-mean crop) are flagged rather than raised;
    their features are reported on the full frame.
    """
    flags: list[str] = []
    cropped, box = crop_black_margins(img, config.dark_threshold)
    if box.degenerate:
        flags.append("degenerate_crop")

    def _wrap(name, fn, *args):
        try:
            return fn(*args)
        except CurationError as exc:
            raise FeatureError(f"{name}: {exc}") from exc

    b = _wrap("brightness", brightness, cropped)
    v = _wrap("vesselness", vesselness, cropped, config.vessel_scales, config.tophat_radius, config.frangi_beta)
    s = _wrap("sharpness", sharpness, cropped)
    e = _wrap("entropy", entropy, cropped)
    ptm = _wrap("peak_to_mean", peak_to_mean, cropped)
    if math.isnan(ptm):
        flags.append("zero_mean")
        ptm = 1.0
    blurry, artifacts = (vlm if vlm is not None else (None, None))
    return QualityFeatures(b, v, s, e, ptm, blurry, artifacts, tuple(flags))


# ---------------------------------------------------------------------------
# features.csv
# ---------------------------------------------------------------------------

def write_features_csv(
    path: str | Path,
    rows: list[tuple[str, QualityFeatures, str | None]],
) -> None:
    """One row per image, ordered by image_id; absent fields are empty cells."""
    lines = [",".join(CSV_HEADER)]
    for image_id, feats, label in sorted(rows, key=lambda r: r[0]):
        vals = feats.as_row()
        cells = [image_id]
        for name in FEATURE_NAMES:
            v = vals[name]
            cells.append("" if v is None else repr(float(v)))
        cells.append(label or "")
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_features_csv(path: str | Path) -> tuple[list[str], np.ndarray, list[str | None], list[str]]:
    """Parse features.csv into (ids, X, labels, schema).

    The schema keeps the base features plus blurry/artifacts only when every
    row carries them, so the matrix is always dense.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise FeatureError(f"unexpected features.csv header in {path}")
        raw = [row for row in reader if row]
    ids = [row[0] for row in raw]
    labels: list[str | None] = [row[-1] or None for row in raw]
    cols = {name: [row[1 + i] for row in raw] for i, name in enumerate(FEATURE_NAMES)}
    schema = [n for n in FEATURE_NAMES if all(c != "" for c in cols[n])]
    x = np.array([[float(cols[n][i]) for n in schema] for i in range(len(raw))], dtype=np.float64)
    if len(raw) == 0:
        x = np.zeros((0, len(schema)))
    return ids, x, labels, schema
