"""Detection -> 3D box segmentation and merging into the entity set."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ValidationError
from ..scene import Box3, PhysicalEntity, Vec3
from .camera import CameraModel, Detection2D, PointCloud, frustum_from_detection, points_in_frustum
from .dbscan import dbscan
from .hpr import DEFAULT_GAMMA, hidden_point_removal


@dataclass(frozen=True)
class SegmentParams:
    near: float = 0.2
    far: float = 10.0
    gamma: float = DEFAULT_GAMMA
    eps: float = 0.1
    min_pts: int = 10
    # boxes need positive extent even for a flat or single-point cluster
    min_half_extent: float = 1e-3

    def __post_init__(self) -> None:
        if not 0 < self.near < self.far:
            raise ValidationError("need 0 < near < far")
        if not self.min_half_extent > 0:
            raise ValidationError("min_half_extent must be > 0")


@dataclass(frozen=True)
class Segmentation:
    """Intermediate results kept for inspection and testing."""

    in_frustum: np.ndarray  # indices into the input cloud
    visible: np.ndarray  # indices into the input cloud
    cluster: np.ndarray  # indices into the input cloud, empty for no object
    entity: PhysicalEntity | None


def fit_box(points: np.ndarray, min_half_extent: float = 1e-3) -> Box3:
    lo, hi = points.min(axis=0), points.max(axis=0)
    half = np.maximum((hi - lo) / 2.0, min_half_extent)
    return Box3(Vec3.of((lo + hi) / 2.0), Vec3.of(half))


def segment(cloud: PointCloud, cam: CameraModel, det: Detection2D,
            params: SegmentParams | None = None) -> Segmentation:
    p = params or SegmentParams()
    empty = np.zeros(0, dtype=int)
    frustum = frustum_from_detection(cam, det, p.near, p.far)
    inside = np.flatnonzero(frustum.contains(cloud.points)) if len(cloud) else empty
    if len(inside) == 0:
        return Segmentation(empty, empty, empty, None)
    sub = cloud.subset(inside)
    visible = inside[hidden_point_removal(sub, cam.center, p.gamma)]
    if len(visible) == 0:
        return Segmentation(inside, empty, empty, None)
    clusters = dbscan(cloud.subset(visible), p.eps, p.min_pts).clusters
    if not clusters:
        return Segmentation(inside, visible, empty, None)
    sizes = [len(c) for c in clusters]
    chosen = visible[clusters[int(np.argmax(sizes))]]
    box = fit_box(cloud.points[chosen], p.min_half_extent)
    return Segmentation(inside, visible, chosen, PhysicalEntity(det.label, det.label, box))


def segment_box(cloud: PointCloud, cam: CameraModel, det: Detection2D,
                params: SegmentParams | None = None) -> PhysicalEntity | None:
    """Unrated entity boxing the largest visible cluster in the detection frustum.

    Returns None when no cluster survives. The entity id is the label; it is
    made unique when merged.
    """
    return segment(cloud, cam, det, params).entity


def iou(a: Box3, b: Box3) -> float:
    lo = np.maximum(a.lo, b.lo)
    hi = np.minimum(a.hi, b.hi)
    inter = float(np.prod(np.clip(hi - lo, 0.0, None)))
    union = a.volume + b.volume - inter
    return inter / union if union > 0 else 0.0


def _fresh_id(label: str, taken: set[str]) -> str:
    n = 1
    while f"{label}-{n}" in taken:
        n += 1
    return f"{label}-{n}"


def merge_detection(entities: Sequence[PhysicalEntity], candidate: PhysicalEntity,
                    iou_threshold: float = 0.5) -> list[PhysicalEntity]:
    """Replace the best-matching same-label box or append the candidate.

    A match needs IoU >= ``iou_threshold``; the replaced entity keeps its id and
    ratings. Other same-label boxes that the new box matches are dropped so no
    two same-label boxes overlap above the threshold. Appended entities get the
    id ``<label>-<n>``.
    """
    if not 0 < iou_threshold <= 1:
        raise ValidationError(f"iou_threshold must lie in (0, 1], got {iou_threshold}")
    out = list(entities)
    scores = [iou(e.box, candidate.box) if e.label == candidate.label else -1.0 for e in out]
    best = int(np.argmax(scores)) if scores else -1
    if best >= 0 and scores[best] >= iou_threshold:
        keep = out[best].with_box(candidate.box)
        return [keep if i == best else e for i, e in enumerate(out)
                if i == best or scores[i] < iou_threshold]
    new_id = _fresh_id(candidate.label, {e.id for e in out})
    return out + [PhysicalEntity(new_id, candidate.label, candidate.box,
                                 candidate.overlay_rating, candidate.interaction_rating)]
