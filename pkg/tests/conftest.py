import json

import numpy as np
import pytest

from drcurate.core import RasterImage, save_image, save_mask, LesionMask


def make_fundus(size=96, vessel_boost=60, disc_margin=8, seed=0):
    """Synthetic fundus: dark frame, reddish disc, brighter vessel lines."""
    rng = np.random.RandomState(seed)
    img = np.zeros((size, size, 3), dtype=np.uint8)
    yy, xx = np.mgrid[0:size, 0:size]
    cy = cx = size // 2
    radius = size // 2 - disc_margin
    disc = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
    base = np.stack([np.full((size, size), 140), np.full((size, size), 90), np.full((size, size), 60)], axis=-1)
    noise = rng.randint(-8, 9, size=(size, size, 3))
    img = np.where(disc[..., None], np.clip(base + noise, 0, 255), 0).astype(np.uint8)
    # a few vessel strokes through the disc
    for k, row in enumerate(range(size // 4, 3 * size // 4, size // 8)):
        sl = (slice(row, row + 2), slice(cx - radius + 2, cx + radius - 2))
        region = img[sl].astype(np.int16)
        region[..., 1] = np.clip(region[..., 1] + vessel_boost, 0, 255)
        img[sl] = np.where(disc[sl][..., None], region.clip(0, 255), 0).astype(np.uint8)
    return RasterImage(img)


def constant_image(level, size=16, rgb=False):
    if rgb:
        return RasterImage(np.full((size, size, 3), level, dtype=np.uint8))
    return RasterImage(np.full((size, size), level, dtype=np.uint8))


def random_mask(rng, h, w, p=0.3):
    return rng.rand(h, w) < p


@pytest.fixture
def fundus():
    return make_fundus()


def build_manifest_dir(root, images, annotations=None, predictions=None, quality=None, vlm=None):
    """Write a dataset directory: images, masks, sidecars, manifest.json.

    images: {image_id: RasterImage}; annotations: {image_id: [(annotator,
    lesion, grid, confidence, expertise)]}; predictions: {image_id:
    {lesion: grid}}; quality: {image_id: 'good'|'bad'}; vlm: {image_id:
    (blurry, artifacts)}.
    """
    root.mkdir(parents=True, exist_ok=True)
    annotations = annotations or {}
    predictions = predictions or {}
    quality = quality or {}
    entries = []
    if vlm:
        sidecar = {i: {"blurry": b, "artifacts": a} for i, (b, a) in vlm.items()}
        (root / "vlm_scores.json").write_text(json.dumps(sidecar))
    for image_id, img in images.items():
        img_rel = f"images/{image_id}.png"
        save_image(img, root / img_rel)
        ann_recs = []
        for annotator, lesion, grid, conf, expe in annotations.get(image_id, []):
            rel = f"annotations/{image_id}__{annotator}__{lesion.value}.png"
            save_mask(LesionMask(lesion, np.asarray(grid, dtype=bool)), root / rel)
            ann_recs.append(
                {"path": rel, "annotator": annotator, "lesion": lesion.value,
                 "confidence": conf, "expertise": expe}
            )
        pred_recs = {}
        for lesion, grid in predictions.get(image_id, {}).items():
            rel = f"predictions/{image_id}__{lesion.value}.png"
            save_mask(LesionMask(lesion, np.asarray(grid, dtype=bool)), root / rel)
            pred_recs[lesion.value] = rel
        entries.append(
            {
                "id": image_id,
                "path": img_rel,
                "quality": quality.get(image_id),
                "vlm_scores": "vlm_scores.json" if vlm and image_id in vlm else None,
                "annotations": ann_recs,
                "predictions": pred_recs,
            }
        )
    (root / "manifest.json").write_text(json.dumps({"images": entries}, indent=2))
    return root / "manifest.json"
