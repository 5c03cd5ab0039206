"""Inter-annotator agreement: Cohen's kappa and Dice, plain and weighted.

Two annotators' binary masks are compared per pixel. Plain metrics count
pixels; weighted metrics value each annotator's foreground marks by
p = confidence x expertise, so agreement between hesitant or junior
annotators counts for less. On top of the pairwise metrics sits a
three-step curation protocol: average pairwise agreement per lesion type,
discard outlier annotators, then keep or discard the image on the overall
score.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Annotation, CurationError, DimensionMismatchError, LesionMask, LesionType


class AgreementError(CurationError):
    pass


@dataclass(frozen=True)
class ConfusionSums:
    """Joint-foreground (a), one-sided (b, c) and joint-background (d) mass."""

    a: float
    b: float
    c: float
    d: float

    @property
    def total(self) -> float:
        return self.a + self.b + self.c + self.d

    @property
    def is_degenerate(self) -> bool:
        # 1 - expected chance agreement collapses to zero exactly when both
        # cross-marginal products vanish; only identical verdict patterns
        # (b = c = 0 with a or d empty) can get there.
        return (self.a + self.b) * (self.b + self.d) + (self.c + self.d) * (self.a + self.c) == 0.0


@dataclass(frozen=True)
class ProtocolThresholds:
    pairwise_low: float = 0.4
    outlier_count: int | None = None  # None -> ceil((n - 1) / 2) per image
    overall_discard: float = 0.4
    per_lesion_slight: float = 0.2  # reporting band only

    def __post_init__(self):
        for name in ("pairwise_low", "overall_discard", "per_lesion_slight"):
            v = getattr(self, name)
            if not -1.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [-1, 1]")
        if self.outlier_count is not None and self.outlier_count < 1:
            raise ValueError("outlier_count must be >= 1")

    def effective_outlier_count(self, n_annotators: int) -> int:
        if self.outlier_count is not None:
            return self.outlier_count
        return max(1, math.ceil((n_annotators - 1) / 2))


def _check_masks(mi: LesionMask, mj: LesionMask) -> None:
    if mi.grid.shape != mj.grid.shape:
        raise DimensionMismatchError(f"mask shapes differ: {mi.grid.shape} vs {mj.grid.shape}")


def confusion(mask_i: LesionMask, mask_j: LesionMask) -> ConfusionSums:
    """Integer pixel counts of the 2x2 foreground/background table."""
    _check_masks(mask_i, mask_j)
    gi, gj = mask_i.grid, mask_j.grid
    a = int(np.count_nonzero(gi & gj))
    b = int(np.count_nonzero(gi & ~gj))
    c = int(np.count_nonzero(~gi & gj))
    d = gi.size - a - b - c
    return ConfusionSums(float(a), float(b), float(c), float(d))


def weighted_confusion(ann_i: Annotation, ann_j: Annotation) -> ConfusionSums:
    """Confusion mass with each annotator's marks weighted by p = conf x exp.

    Joint foreground accumulates p_i * p_j, one-sided foreground the single
    annotator's p; joint background stays a plain count. A weight of zero
    erases that annotator's marks entirely.
    """
    _check_masks(ann_i.mask, ann_j.mask)
    wi = ann_i.mask.grid * ann_i.pixel_weight
    wj = ann_j.mask.grid * ann_j.pixel_weight
    fi, fj = wi > 0, wj > 0
    a = float((wi * wj)[fi & fj].sum())
    b = float(wi[fi & ~fj].sum())
    c = float(wj[~fi & fj].sum())
    d = float(np.count_nonzero(~fi & ~fj))
    return ConfusionSums(a, b, c, d)


def cohen_kappa(sums: ConfusionSums) -> float:
    """Chance-corrected agreement from confusion sums.

    Degenerate tables (expected chance agreement of 1, i.e. both masks empty
    or both full) score 1.0 when the judgments are identical and 0.0
    otherwise; ``sums.is_degenerate`` flags such rows for the report.
    """
    t = sums.total
    if t <= 0:
        raise AgreementError("confusion sums are empty")
    if sums.is_degenerate:
        return 1.0 if sums.b == 0.0 and sums.c == 0.0 else 0.0
    po = (sums.a + sums.d) / t
    pe = ((sums.a + sums.b) * (sums.a + sums.c) + (sums.c + sums.d) * (sums.b + sums.d)) / (t * t)
    return (po - pe) / (1.0 - pe)


def dsc_from_sums(sums: ConfusionSums) -> float:
    denom = 2.0 * sums.a + sums.b + sums.c
    if denom == 0.0:  # both empty
        return 1.0
    return 2.0 * sums.a / denom


def dsc(mask_i: LesionMask, mask_j: LesionMask) -> float:
    """Dice overlap of two masks; two empty masks agree perfectly."""
    return dsc_from_sums(confusion(mask_i, mask_j))


def weighted_dsc(ann_i: Annotation, ann_j: Annotation) -> float:
    """Dice on confidence/expertise-weighted sums."""
    return dsc_from_sums(weighted_confusion(ann_i, ann_j))


# ---------------------------------------------------------------------------
# Curation protocol
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairwiseMatrix:
    """Symmetric weighted-kappa matrix for one lesion type (diagonal NaN)."""

    lesion: LesionType
    annotators: tuple[str, ...]
    kappa: np.ndarray

    @property
    def average(self) -> float:
        iu = np.triu_indices(len(self.annotators), k=1)
        return float(self.kappa[iu].mean())

    def value(self, ai: str, aj: str) -> float:
        i, j = self.annotators.index(ai), self.annotators.index(aj)
        return float(self.kappa[i, j])


def pairwise_matrix(annotations: list[Annotation], lesion: LesionType) -> PairwiseMatrix | None:
    """Weighted kappa between every annotator pair for one lesion type.

    Returns None (the "skipped with notice" case) when fewer than two
    annotators marked this lesion.
    """
    anns = sorted((a for a in annotations if a.lesion == lesion), key=lambda a: a.annotator_id)
    if len(anns) < 2:
        return None
    n = len(anns)
    mat = np.full((n, n), np.nan)
    for i in range(n):
        for j in range(i + 1, n):
            k = cohen_kappa(weighted_confusion(anns[i], anns[j]))
            mat[i, j] = mat[j, i] = k
    return PairwiseMatrix(lesion, tuple(a.annotator_id for a in anns), mat)


def detect_outliers(
    matrices: dict[LesionType, PairwiseMatrix],
    annotators: list[str],
    thresholds: ProtocolThresholds = ProtocolThresholds(),
) -> set[str]:
    """Annotators whose agreement is low with too many of their peers.

    For each pair the kappas are averaged over the lesion types both
    annotated; an annotator is discarded when the number of peers below
    ``pairwise_low`` exceeds the outlier count. Never discards below two
    remaining annotators.
    """
    n = len(annotators)
    if n < 3:  # with only two annotators the image is resolved at step 3
        return set()
    pair_scores: dict[tuple[str, str], list[float]] = {}
    for mat in matrices.values():
        if mat is None:
            continue
        for i, ai in enumerate(mat.annotators):
            for aj in mat.annotators[i + 1 :]:
                pair_scores.setdefault((ai, aj), []).append(mat.value(ai, aj))
    low_counts = {a: 0 for a in annotators}
    mean_with_peers = {a: [] for a in annotators}
    for (ai, aj), scores in pair_scores.items():
        mean_k = float(np.mean(scores))
        mean_with_peers[ai].append(mean_k)
        mean_with_peers[aj].append(mean_k)
        if mean_k < thresholds.pairwise_low:
            low_counts[ai] += 1
            low_counts[aj] += 1
    limit = thresholds.effective_outlier_count(n)
    flagged = [a for a in annotators if low_counts[a] > limit]
    # worst offenders first; cap so at least two annotators remain
    flagged.sort(key=lambda a: (-low_counts[a], float(np.mean(mean_with_peers[a] or [0.0])), a))
    return set(flagged[: max(0, n - 2)])


def overall_agreement(
    annotations: list[Annotation],
    thresholds: ProtocolThresholds = ProtocolThresholds(),
) -> tuple[float | None, str]:
    """Mean over lesion types of average pairwise weighted kappa, and verdict."""
    if len({a.annotator_id for a in annotations}) < 2:
        return None, "insufficient"
    averages = []
    for lesion in LesionType:
        mat = pairwise_matrix(annotations, lesion)
        if mat is not None:
            averages.append(mat.average)
    if not averages:
        return None, "insufficient"
    score = float(np.mean(averages))
    return score, ("discard" if score < thresholds.overall_discard else "keep")


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AgreementRow:
    lesion: LesionType
    kappa: float
    w_kappa: float
    dsc: float
    w_dsc: float
    degenerate: bool


@dataclass(frozen=True)
class AgreementReport:
    image_id: str
    rows: tuple[AgreementRow, ...]
    average: dict[str, float] = field(default_factory=dict)
    discarded_annotators: tuple[str, ...] = ()
    verdict: str = "insufficient"
    overall_score: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "rows": [
                {
                    "lesion": r.lesion.value,
                    "kappa": r.kappa,
                    "w_kappa": r.w_kappa,
                    "dsc": r.dsc,
                    "w_dsc": r.w_dsc,
                    "degenerate": r.degenerate,
                }
                for r in self.rows
            ],
            "average": self.average,
            "discarded_annotators": list(self.discarded_annotators),
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self, slight_threshold: float = 0.2) -> str:
        lines = [
            f"Inter-annotator agreement for image {self.image_id}",
            f"{'Lesion':<8}{'Cohen Kappa':>12}{'W Cohen Kappa':>15}{'DSC':>8}{'Weighted DSC':>14}",
        ]
        for r in self.rows:
            note = " (degenerate)" if r.degenerate else (" (slight)" if r.w_kappa < slight_threshold else "")
            lines.append(
                f"{r.lesion.value:<8}{r.kappa:>12.2f}{r.w_kappa:>15.2f}{r.dsc:>8.2f}{r.w_dsc:>14.2f}{note}"
            )
        if self.average:
            a = self.average
            lines.append(
                f"{'Average':<8}{a['kappa']:>12.2f}{a['w_kappa']:>15.2f}{a['dsc']:>8.2f}{a['w_dsc']:>14.2f}"
            )
        if self.discarded_annotators:
            lines.append("Discarded annotators: " + ", ".join(self.discarded_annotators))
        lines.append(f"Verdict: {self.verdict}")
        return "\n".join(lines) + "\n"


def _pair_metrics(anns: list[Annotation]) -> tuple[float, float, float, float, bool]:
    ks, wks, ds, wds = [], [], [], []
    degenerate = False
    for i in range(len(anns)):
        for j in range(i + 1, len(anns)):
            us = confusion(anns[i].mask, anns[j].mask)
            ws = weighted_confusion(anns[i], anns[j])
            degenerate = degenerate or us.is_degenerate or ws.is_degenerate
            ks.append(cohen_kappa(us))
            wks.append(cohen_kappa(ws))
            ds.append(dsc_from_sums(us))
            wds.append(dsc_from_sums(ws))
    return float(np.mean(ks)), float(np.mean(wks)), float(np.mean(ds)), float(np.mean(wds)), degenerate


def report(
    image_id: str,
    annotations: list[Annotation],
    thresholds: ProtocolThresholds = ProtocolThresholds(),
) -> AgreementReport:
    """Run protocol steps 1-3 and assemble the per-lesion report."""
    annotators = sorted({a.annotator_id for a in annotations})
    if len(annotators) < 2:
        return AgreementReport(image_id=image_id, rows=(), verdict="insufficient")
    matrices = {
        lesion: m for lesion in LesionType if (m := pairwise_matrix(annotations, lesion)) is not None
    }
    discarded = detect_outliers(matrices, annotators, thresholds)
    remaining = [a for a in annotations if a.annotator_id not in discarded]
    rows = []
    for lesion in LesionType:
        anns = sorted((a for a in remaining if a.lesion == lesion), key=lambda a: a.annotator_id)
        if len(anns) < 2:
            continue
        k, wk, d, wd, degen = _pair_metrics(anns)
        rows.append(AgreementRow(lesion, k, wk, d, wd, degen))
    score, verdict = overall_agreement(remaining, thresholds)
    average = {}
    if rows:
        average = {
            "kappa": float(np.mean([r.kappa for r in rows])),
            "w_kappa": float(np.mean([r.w_kappa for r in rows])),
            "dsc": float(np.mean([r.dsc for r in rows])),
            "w_dsc": float(np.mean([r.w_dsc for r in rows])),
        }
    return AgreementReport(
        image_id=image_id,
        rows=tuple(rows),
        average=average,
        discarded_annotators=tuple(sorted(discarded)),
        verdict=verdict,
        overall_score=score,
    )
