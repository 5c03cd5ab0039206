"""HTTP facade over the file-backed store for the annotation UI.

The store is just a manifest directory: the CLI and the service share one
source of truth with no migration machinery. Enhanced views and
post-processed suggestions are computed lazily and cached by content;
agreement reports are recomputed on every read so threshold changes need
no invalidation. Writes are serialized per image id; annotator identity
travels in the ``X-Annotator-Id`` header.
"""

from __future__ import annotations

import hashlib
import io
import json
import threading
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Header, HTTPException, Query, Request, Response
from PIL import Image

from . import agreement as agreement_mod
from . import core
from .agreement import ProtocolThresholds
from .enhance import EnhancementParams, enhance
from .postprocess import PostprocessParams, postprocess_mask


def load_thresholds(path: str | Path) -> ProtocolThresholds:
    doc = json.loads(Path(path).read_text())
    return ProtocolThresholds(
        pairwise_low=float(doc.get("pairwise_low", 0.4)),
        outlier_count=doc.get("outlier_count"),
        overall_discard=float(doc.get("overall_discard", 0.4)),
        per_lesion_slight=float(doc.get("per_lesion_slight", 0.2)),
    )


@dataclass
class AnnotatorProfile:
    annotator_id: str
    display_name: str
    expertise: float
    band: str | None = None


def decode_rle(doc: dict) -> np.ndarray:
    """Row-major run-length counts, alternating background/foreground.

    The first run is background (possibly of length 0); runs must cover
    width*height exactly.
    """
    try:
        width, height = int(doc["width"]), int(doc["height"])
        runs = [int(r) for r in doc["rle"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed RLE payload: {exc}") from exc
    if width < 1 or height < 1 or any(r < 0 for r in runs):
        raise ValueError("malformed RLE payload")
    if sum(runs) != width * height:
        raise ValueError(f"RLE covers {sum(runs)} pixels, expected {width * height}")
    flat = np.zeros(width * height, dtype=bool)
    pos = 0
    fg = False
    for run in runs:
        if fg:
            flat[pos : pos + run] = True
        pos += run
        fg = not fg
    return flat.reshape(height, width)


def encode_rle(grid: np.ndarray) -> dict:
    """Inverse of :func:`decode_rle`."""
    flat = np.asarray(grid, dtype=bool).ravel()
    runs: list[int] = []
    pos = 0
    boundaries = np.flatnonzero(np.diff(flat.astype(np.int8))) + 1
    for b in list(boundaries) + [flat.size]:
        if not runs and flat[0]:
            runs.append(0)  # first run is background by convention
        runs.append(int(b - pos))
        pos = b
    return {"width": int(grid.shape[1]), "height": int(grid.shape[0]), "rle": runs}


class Store:
    """Manifest directory plus annotator registry and lazy caches."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.manifest_path = self.root / "manifest.json"
        self.annotators_path = self.root / "annotators.json"
        self._manifest_lock = threading.Lock()
        self._image_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()

    def image_lock(self, image_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._image_locks[image_id]

    def manifest(self) -> core.DatasetManifest:
        return core.load_manifest(self.manifest_path)

    def annotators(self) -> dict[str, AnnotatorProfile]:
        if not self.annotators_path.is_file():
            return {}
        doc = json.loads(self.annotators_path.read_text())
        return {
            rec["annotator_id"]: AnnotatorProfile(
                annotator_id=rec["annotator_id"],
                display_name=rec.get("display_name", rec["annotator_id"]),
                expertise=float(rec["expertise"]),
                band=rec.get("band"),
            )
            for rec in doc.get("annotators", [])
        }

    def save_annotator(self, profile: AnnotatorProfile) -> None:
        with self._manifest_lock:
            profiles = self.annotators()
            profiles[profile.annotator_id] = profile
            doc = {
                "annotators": [
                    {
                        "annotator_id": p.annotator_id,
                        "display_name": p.display_name,
                        "expertise": p.expertise,
                        "band": p.band,
                    }
                    for p in sorted(profiles.values(), key=lambda p: p.annotator_id)
                ]
            }
            core.atomic_write_text(self.annotators_path, json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def record_annotation(
        self, image_id: str, annotator: str, lesion: core.LesionType,
        grid: np.ndarray, confidence: float, expertise: float,
    ) -> str:
        relpath = f"annotations/{image_id}__{annotator}__{lesion.value}.png"
        core.save_mask(core.LesionMask(lesion, grid), self.root / relpath)
        with self._manifest_lock:
            manifest = self.manifest()
            entries = []
            for e in manifest.entries:
                if e.image_id != image_id:
                    entries.append(e)
                    continue
                anns = [
                    a for a in e.annotations
                    if not (a.annotator == annotator and a.lesion == lesion)
                ]
                anns.append(
                    core.ManifestAnnotation(
                        path=relpath, annotator=annotator, lesion=lesion,
                        confidence=confidence, expertise=expertise,
                    )
                )
                anns.sort(key=lambda a: (a.annotator, a.lesion.value))
                entries.append(
                    core.ManifestEntry(
                        image_id=e.image_id, path=e.path, quality=e.quality,
                        vlm_scores=e.vlm_scores, annotations=tuple(anns), predictions=e.predictions,
                    )
                )
            core.save_manifest(core.DatasetManifest(manifest.root, tuple(entries)), self.manifest_path)
        return relpath


def _etag(data: bytes) -> str:
    return '"' + hashlib.sha256(data).hexdigest() + '"'


def _png_response(data: bytes) -> Response:
    return Response(content=data, media_type="image/png", headers={"ETag": _etag(data)})


def create_app(
    store_dir: Path,
    thresholds: ProtocolThresholds | None = None,
    enhance_params: EnhancementParams | None = None,
    postprocess_params: PostprocessParams | None = None,
) -> FastAPI:
    store = Store(Path(store_dir))
    thresholds = thresholds or ProtocolThresholds()
    enhance_params = enhance_params or EnhancementParams()
    postprocess_params = postprocess_params or PostprocessParams()
    app = FastAPI(title="drcurate annotation service")

    def entry_or_404(image_id: str) -> tuple[core.DatasetManifest, core.ManifestEntry]:
        manifest = store.manifest()
        try:
            return manifest, manifest.by_id(image_id)
        except core.ManifestError:
            raise HTTPException(status_code=404, detail=f"unknown image id {image_id!r}")

    @app.get("/images")
    def list_images():
        manifest = store.manifest()
        out = []
        for e in sorted(manifest.entries, key=lambda e: e.image_id):
            with Image.open(manifest.resolve(e.path)) as im:
                width, height = im.size
            out.append(
                {
                    "id": e.image_id,
                    "quality": e.quality,
                    "width": width,
                    "height": height,
                    "predictions": sorted(k.value for k in e.predictions),
                    "annotations": [
                        {"annotator": a.annotator, "lesion": a.lesion.value, "confidence": a.confidence}
                        for a in e.annotations
                    ],
                }
            )
        return {"images": out}

    @app.get("/annotators")
    def list_annotators():
        return {
            "annotators": [
                {"annotator_id": p.annotator_id, "display_name": p.display_name,
                 "expertise": p.expertise, "band": p.band}
                for p in sorted(store.annotators().values(), key=lambda p: p.annotator_id)
            ]
        }

    @app.post("/annotators")
    def register_annotator(profile: dict):
        try:
            annotator_id = str(profile["annotator_id"])
            display_name = str(profile.get("display_name", annotator_id))
            expertise = float(profile["expertise"])
        except (KeyError, TypeError, ValueError):
            raise HTTPException(status_code=400, detail="annotator_id and expertise are required")
        if not 0.0 <= expertise <= 1.0:
            raise HTTPException(status_code=400, detail="expertise must lie in [0, 1]")
        band = profile.get("band")
        if band is not None:
            try:
                ok = core.expertise_band_contains(band, expertise)
            except KeyError:
                raise HTTPException(status_code=400, detail=f"unknown expertise band {band!r}")
            if not ok:
                raise HTTPException(status_code=400, detail=f"expertise {expertise} outside band {band!r}")
        store.save_annotator(AnnotatorProfile(annotator_id, display_name, expertise, band))
        return {"annotator_id": annotator_id, "expertise": expertise, "band": band}

    @app.get("/images/{image_id}/enhanced")
    def get_enhanced(image_id: str):
        manifest, e = entry_or_404(image_id)
        cache = store.root / ".cache" / "enhanced" / f"{image_id}.png"
        if not cache.is_file():
            with store.image_lock(image_id):
                if not cache.is_file():
                    img = core.load_image(manifest.resolve(e.path))
                    result, _ = enhance(img, enhance_params)
                    core.save_image(result, cache)
        return _png_response(cache.read_bytes())

    @app.get("/images/{image_id}/suggestions/{lesion}")
    def get_suggestions(image_id: str, lesion: str):
        manifest, e = entry_or_404(image_id)
        try:
            lesion_t = core.LesionType(lesion)
        except ValueError:
            raise HTTPException(status_code=404, detail=f"unknown lesion type {lesion!r}")
        if lesion_t not in e.predictions:
            raise HTTPException(status_code=409, detail=f"no prediction mask for {lesion} on {image_id}")
        cache = store.root / ".cache" / "suggestions" / f"{image_id}_{lesion}.png"
        if not cache.is_file():
            with store.image_lock(image_id):
                if not cache.is_file():
                    img = core.load_image(manifest.resolve(e.path))
                    mask = core.load_mask(manifest.resolve(e.predictions[lesion_t]), lesion_t)
                    filtered = postprocess_mask(img, mask, postprocess_params)
                    core.save_mask(filtered, cache)
        return _png_response(cache.read_bytes())

    @app.post("/images/{image_id}/annotations/{lesion}")
    async def submit_annotation(
        image_id: str,
        lesion: str,
        request: Request,
        confidence: float = Query(...),
        x_annotator_id: str = Header(..., alias="X-Annotator-Id"),
    ):
        manifest, e = entry_or_404(image_id)
        try:
            lesion_t = core.LesionType(lesion)
        except ValueError:
            raise HTTPException(status_code=404, detail=f"unknown lesion type {lesion!r}")
        profiles = store.annotators()
        if x_annotator_id not in profiles:
            raise HTTPException(status_code=404, detail=f"unknown annotator {x_annotator_id!r}")
        if not 0.0 <= confidence <= 1.0:
            raise HTTPException(status_code=400, detail="confidence must lie in [0, 1]")
        body = await request.body()
        ctype = request.headers.get("content-type", "")
        try:
            if ctype.startswith("image/png"):
                with Image.open(io.BytesIO(body)) as im:
                    if im.mode != "L":
                        raise ValueError(f"mask PNG must be single-channel grayscale, got mode {im.mode}")
                    grid = np.asarray(im, dtype=np.uint8) > 127
            elif ctype.startswith("application/json"):
                grid = decode_rle(json.loads(body))
            else:
                raise ValueError(f"unsupported content type {ctype!r}; send image/png or RLE JSON")
        except (ValueError, OSError, json.JSONDecodeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        img = core.load_image(manifest.resolve(e.path))
        if grid.shape != (img.height, img.width):
            raise HTTPException(
                status_code=400,
                detail=f"mask is {grid.shape[1]}x{grid.shape[0]}, image is {img.width}x{img.height}",
            )
        with store.image_lock(image_id):
            relpath = store.record_annotation(
                image_id, x_annotator_id, lesion_t, grid, confidence, profiles[x_annotator_id].expertise
            )
        return {"image_id": image_id, "lesion": lesion, "annotator": x_annotator_id, "path": relpath}

    @app.get("/images/{image_id}/annotations/{lesion}")
    def get_annotation(image_id: str, lesion: str, annotator: str = Query(...), format: str = Query("png")):
        manifest, e = entry_or_404(image_id)
        try:
            lesion_t = core.LesionType(lesion)
        except ValueError:
            raise HTTPException(status_code=404, detail=f"unknown lesion type {lesion!r}")
        for a in e.annotations:
            if a.annotator == annotator and a.lesion == lesion_t:
                if format == "rle":
                    mask = core.load_mask(manifest.resolve(a.path), lesion_t)
                    return {"confidence": a.confidence, **encode_rle(mask.grid)}
                return _png_response(manifest.resolve(a.path).read_bytes())
        raise HTTPException(status_code=404, detail=f"no {lesion} annotation by {annotator!r} on {image_id}")

    @app.get("/images/{image_id}/agreement")
    def get_agreement(image_id: str):
        manifest, e = entry_or_404(image_id)
        annotations = core.load_annotations(manifest, e)
        rep = agreement_mod.report(image_id, annotations, thresholds)
        return rep.to_json_dict()

    return app
