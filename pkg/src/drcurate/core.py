"""Shared data model, file I/O and dataset manifest.

Everything downstream (features, enhancement, post-processing, agreement,
CLI, service) moves pixels around as :class:`RasterImage` / binary mask
arrays and locates them through a single ``manifest.json`` per dataset
directory. All types are immutable after construction; file writes are
atomic (write-temp-then-rename).
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError


class CurationError(Exception):
    """Base class for errors raised by this package."""


class MissingFileError(CurationError):
    pass


class UnsupportedFormatError(CurationError):
    pass


class CorruptDataError(CurationError):
    pass


class DimensionMismatchError(CurationError):
    pass


class ManifestError(CurationError):
    pass


class LesionType(str, Enum):
    EX = "EX"  # hard exudates
    SE = "SE"  # soft exudates / cotton-wool spots
    HA = "HA"  # hemorrhages
    MA = "MA"  # microaneurysms


# Band labels -> band midpoints. Continuous values are the source of truth;
# labels are presentation sugar.
CONFIDENCE_BANDS = {
    "very low": (0.0, 0.2),
    "low": (0.2, 0.4),
    "medium": (0.4, 0.6),
    "high": (0.6, 0.8),
    "very high": (0.8, 1.0),
}

EXPERTISE_BANDS = {
    "no medical background": (0.0, 0.1),
    "medical student": (0.1, 0.3),
    "doctor in another specialty": (0.3, 0.5),
    "resident/junior ophthalmologist": (0.5, 0.9),
    "expert ophthalmologist": (0.9, 1.0),
}


def confidence_from_band(label: str) -> float:
    lo, hi = CONFIDENCE_BANDS[label.strip().lower()]
    return (lo + hi) / 2.0


def expertise_from_band(label: str) -> float:
    lo, hi = EXPERTISE_BANDS[label.strip().lower()]
    return (lo + hi) / 2.0


def expertise_band_contains(label: str, value: float) -> bool:
    lo, hi = EXPERTISE_BANDS[label.strip().lower()]
    if hi >= 1.0:  # top band is closed on the right
        return lo <= value <= 1.0
    return lo <= value < hi


@dataclass(frozen=True)
class RasterImage:
    """8-bit pixel grid, grayscale (H, W) or RGB (H, W, 3), row-major."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise ValueError(f"RasterImage requires uint8 samples, got {px.dtype}")
        if px.ndim == 2:
            pass
        elif px.ndim == 3 and px.shape[2] == 3:
            pass
        else:
            raise ValueError(f"RasterImage must be (H, W) or (H, W, 3), got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("RasterImage dimensions must be >= 1")
        px = np.ascontiguousarray(px)
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else self.pixels.shape[2]

    @property
    def is_rgb(self) -> bool:
        return self.channels == 3


@dataclass(frozen=True)
class LesionMask:
    """Binary per-pixel flags for one lesion type, image-sized."""

    lesion: LesionType
    grid: np.ndarray  # (H, W) bool

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.dtype != np.bool_ or g.ndim != 2:
            raise ValueError("LesionMask grid must be a 2-D bool array")
        g = np.ascontiguousarray(g)
        g.flags.writeable = False
        object.__setattr__(self, "grid", g)

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]


@dataclass(frozen=True)
class Annotation:
    """One annotator's mask for one lesion type on one image.

    ``confidence`` and ``expertise`` are continuous in [0, 1]; their product
    is the per-pixel foreground weight used by the weighted agreement
    metrics.
    """

    annotator_id: str
    image_id: str
    lesion: LesionType
    mask: LesionMask
    confidence: float
    expertise: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if not 0.0 <= self.expertise <= 1.0:
            raise ValueError(f"expertise {self.expertise} outside [0, 1]")
        if self.mask.lesion != self.lesion:
            raise ValueError("annotation lesion disagrees with mask lesion")

    @property
    def pixel_weight(self) -> float:
        return self.confidence * self.expertise


# ---------------------------------------------------------------------------
# Raster file I/O
# ---------------------------------------------------------------------------

def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write ``data`` to ``path`` via a temp file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def load_image(path: str | Path) -> RasterImage:
    """Load a raster file as 8-bit grayscale or RGB.

    Missing files, unrecognized formats and decode failures are reported as
    distinct error types.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"image file not found: {path}")
    try:
        with Image.open(path) as im:
            if im.mode == "L":
                im = im.copy()
            elif im.mode in ("RGB", "RGBA", "P", "LA", "1"):
                im = im.convert("RGB") if im.mode != "1" else im.convert("L")
            else:
                raise UnsupportedFormatError(f"unsupported raster mode {im.mode!r}: {path}")
            arr = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise UnsupportedFormatError(f"not a recognized raster format: {path}") from exc
    except UnsupportedFormatError:
        raise
    except (OSError, SyntaxError, ValueError) as exc:
        raise CorruptDataError(f"corrupt raster data in {path}: {exc}") from exc
    return RasterImage(arr)


def save_image(img: RasterImage, path: str | Path) -> None:
    import io

    mode = "L" if img.channels == 1 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(img.pixels, mode=mode).save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def load_mask(path: str | Path, lesion: LesionType) -> LesionMask:
    """Load a single-channel mask PNG; samples > 127 are foreground.

    Probability masks use the full 0-255 range, so the threshold sits at the
    scale midpoint. Multi-channel input is rejected.
    """
    img = load_image(path)
    if img.channels != 1:
        raise UnsupportedFormatError(f"mask must be single-channel, got {img.channels} channels: {path}")
    return LesionMask(lesion, img.pixels > 127)


def save_mask(mask: LesionMask, path: str | Path) -> None:
    arr = np.where(mask.grid, np.uint8(255), np.uint8(0))
    save_image(RasterImage(arr), path)


def mask_png_bytes(grid: np.ndarray) -> bytes:
    """Encode a bool grid as 8-bit grayscale PNG bytes (0/255)."""
    import io

    arr = np.where(np.asarray(grid, dtype=bool), np.uint8(255), np.uint8(0))
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Patch tiling
# ---------------------------------------------------------------------------

def _axis_offsets(dim: int, size: int, stride: int) -> list[int]:
    if dim <= size:
        return [0]
    offs = list(range(0, dim - size + 1, stride))
    if offs[-1] != dim - size:
        offs.append(dim - size)
    return offs


def tile_patches(img: RasterImage, size: int, stride: int) -> list[tuple[tuple[int, int], RasterImage]]:
    """Cut ``img`` into size x size patches on a stride grid.

    Offsets are ``(x, y)``. The last row/column of patches is clamped to the
    image border, so trailing patches may overlap their predecessors; a size
    larger than the image yields a single patch equal to the whole image.
    """
    if size < 1 or stride < 1:
        raise ValueError("size and stride must be >= 1")
    if stride > size:
        raise ValueError("stride larger than size would leave uncovered gaps")
    xs = _axis_offsets(img.width, size, stride)
    ys = _axis_offsets(img.height, size, stride)
    out = []
    for y in ys:
        for x in xs:
            patch = img.pixels[y : y + size, x : x + size]
            out.append(((x, y), RasterImage(np.ascontiguousarray(patch))))
    return out


def stitch_patches(
    patches: list[tuple[tuple[int, int], RasterImage]],
    width: int,
    height: int,
    channels: int = 1,
) -> RasterImage:
    """Reassemble patches produced by :func:`tile_patches`.

    Overlapping regions are overwritten in patch order; with unmodified
    patches this reconstructs the original image exactly.
    """
    shape = (height, width) if channels == 1 else (height, width, channels)
    canvas = np.zeros(shape, dtype=np.uint8)
    for (x, y), patch in patches:
        canvas[y : y + patch.height, x : x + patch.width] = patch.pixels
    return RasterImage(canvas)


# ---------------------------------------------------------------------------
# Dataset manifest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestAnnotation:
    path: str
    annotator: str
    lesion: LesionType
    confidence: float
    expertise: float


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    path: str
    quality: str | None = None  # "good" | "bad" | None
    vlm_scores: str | None = None  # sidecar path
    annotations: tuple[ManifestAnnotation, ...] = ()
    predictions: dict[LesionType, str] = field(default_factory=dict)


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    entries: tuple[ManifestEntry, ...]

    def by_id(self, image_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.image_id == image_id:
                return e
        raise ManifestError(f"unknown image_id {image_id!r}")

    def resolve(self, relpath: str) -> Path:
        p = Path(relpath)
        return p if p.is_absolute() else self.root / p


def _entry_from_dict(rec: dict) -> ManifestEntry:
    try:
        anns = tuple(
            ManifestAnnotation(
                path=a["path"],
                annotator=a["annotator"],
                lesion=LesionType(a["lesion"]),
                confidence=float(a["confidence"]),
                expertise=float(a["expertise"]),
            )
            for a in rec.get("annotations", [])
        )
        preds = {LesionType(k): v for k, v in (rec.get("predictions") or {}).items()}
        quality = rec.get("quality")
        if quality not in (None, "good", "bad"):
            raise ManifestError(f"quality must be good/bad/null, got {quality!r}")
        return ManifestEntry(
            image_id=rec["id"],
            path=rec["path"],
            quality=quality,
            vlm_scores=rec.get("vlm_scores"),
            annotations=anns,
            predictions=preds,
        )
    except KeyError as exc:
        raise ManifestError(f"manifest record missing field {exc}") from exc
    except ValueError as exc:
        raise ManifestError(str(exc)) from exc


def _entry_to_dict(e: ManifestEntry) -> dict:
    return {
        "id": e.image_id,
        "path": e.path,
        "quality": e.quality,
        "vlm_scores": e.vlm_scores,
        "annotations": [
            {
                "path": a.path,
                "annotator": a.annotator,
                "lesion": a.lesion.value,
                "confidence": a.confidence,
                "expertise": a.expertise,
            }
            for a in e.annotations
        ],
        "predictions": {k.value: v for k, v in sorted(e.predictions.items(), key=lambda kv: kv[0].value)},
    }


def load_manifest(path: str | Path, check_paths: bool = True) -> DatasetManifest:
    """Load and validate ``manifest.json``.

    Duplicate image ids are rejected deterministically (first duplicate in
    file order is named); with ``check_paths`` every referenced file must
    resolve.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "images" not in doc:
        raise ManifestError('manifest must be an object with an "images" list')
    entries = [_entry_from_dict(rec) for rec in doc["images"]]
    seen: set[str] = set()
    for e in entries:
        if e.image_id in seen:
            raise ManifestError(f"duplicate image_id {e.image_id!r}")
        seen.add(e.image_id)
    manifest = DatasetManifest(root=path.parent.resolve(), entries=tuple(entries))
    if check_paths:
        for e in entries:
            refs = [e.path] + [a.path for a in e.annotations] + list(e.predictions.values())
            if e.vlm_scores:
                refs.append(e.vlm_scores)
            for r in refs:
                if not manifest.resolve(r).is_file():
                    raise ManifestError(f"manifest references missing file {r!r} (image {e.image_id})")
    return manifest


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    doc = {"images": [_entry_to_dict(e) for e in manifest.entries]}
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_annotations(manifest: DatasetManifest, entry: ManifestEntry) -> list[Annotation]:
    """Materialize an entry's annotation records as Annotation objects."""
    out = []
    for rec in entry.annotations:
        mask = load_mask(manifest.resolve(rec.path), rec.lesion)
        out.append(
            Annotation(
                annotator_id=rec.annotator,
                image_id=entry.image_id,
                lesion=rec.lesion,
                mask=mask,
                confidence=rec.confidence,
                expertise=rec.expertise,
            )
        )
    return out
