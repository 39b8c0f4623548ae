"""Semantic queries over a concept cloud: relevancy scores, masks, IoU."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import ConceptCloud
from .ply import write_xyzrgb


@dataclass(frozen=True)
class RelevancyResult:
    """Per-point scores for one query.

    normalized is the min-max rescaling of the raw cosines; when all raw
    scores are equal it is the constant 0.5.
    """

    query_text: str
    raw_scores: np.ndarray
    normalized: np.ndarray
    mask: np.ndarray | None = None  # point indices
    iou: float | None = None


def relevancy(cloud: ConceptCloud, query: np.ndarray, query_text: str = "") -> RelevancyResult:
    """Cosine of every point feature against the query embedding."""
    q = np.asarray(query, np.float64).reshape(-1)
    if q.shape[0] != cloud.feature_dim:
        raise ValueError(f"query dimension {q.shape[0]} does not match cloud dimension {cloud.feature_dim}")
    if len(cloud) == 0:
        raise ValueError("cannot query an empty concept cloud")
    qn = float(np.linalg.norm(q))
    if qn < 1e-12:
        raise ValueError("query vector has near-zero norm")
    fn = np.linalg.norm(cloud.features, axis=1)
    raw = (cloud.features @ q) / (np.maximum(fn, 1e-300) * qn)
    lo, hi = float(raw.min()), float(raw.max())
    if hi == lo:
        normalized = np.full(len(raw), 0.5)
    else:
        normalized = (raw - lo) / (hi - lo)
    return RelevancyResult(query_text, raw, normalized)


def threshold_mask(result: RelevancyResult, relevancy_threshold: float) -> np.ndarray:
    """Indices with normalized score >= the threshold."""
    return np.flatnonzero(result.normalized >= relevancy_threshold)


def iou(mask: np.ndarray, target_object: int, cloud: ConceptCloud) -> float:
    """Intersection over union of the mask against the object's points.

    Points without a unanimous source (mixed voxels) count toward the
    union whenever the mask selects them.
    """
    target = np.flatnonzero(cloud.source_objects == target_object)
    if len(target) == 0:
        raise ValueError(f"target object {target_object} is absent from the cloud")
    mask_set = set(int(i) for i in np.asarray(mask).reshape(-1))
    target_set = set(int(i) for i in target)
    union = mask_set | target_set
    if not union:
        return 0.0
    return len(mask_set & target_set) / len(union)


def relevancy_colors(normalized: np.ndarray) -> np.ndarray:
    """Linear blue -> red colormap over [0, 1] scores."""
    s = np.clip(np.asarray(normalized, np.float64), 0.0, 1.0)
    colors = np.zeros((len(s), 3), np.uint8)
    colors[:, 0] = np.rint(255.0 * s).astype(np.uint8)
    colors[:, 2] = np.rint(255.0 * (1.0 - s)).astype(np.uint8)
    return colors


def export_relevancy(cloud: ConceptCloud, result: RelevancyResult, path) -> None:
    """Write the cloud as a PLY colored by normalized relevancy."""
    if len(result.normalized) != len(cloud):
        raise ValueError("result is not aligned with the cloud")
    write_xyzrgb(path, cloud.positions, relevancy_colors(result.normalized))


def with_mask(result: RelevancyResult, mask: np.ndarray, iou_value: float | None = None) -> RelevancyResult:
    return replace(result, mask=np.asarray(mask, np.int64), iou=iou_value)
