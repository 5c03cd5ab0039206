"""drcurate: curation toolkit for diabetic-retinopathy fundus photographs.

Quality scoring with an explainable feature classifier, lesion-visibility
enhancement, post-processing of machine-suggested lesion masks, and
confidence/expertise-weighted inter-annotator agreement reports.
"""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    Annotation,
    CurationError,
    DatasetManifest,
    LesionMask,
    LesionType,
    RasterImage,
    load_image,
    load_manifest,
    load_mask,
    save_image,
    save_mask,
)
