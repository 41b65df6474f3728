"""Hidden point removal by spherical flipping and a convex hull (Katz et al.).

Points are mirrored through a large sphere centered on the viewpoint. A point
is visible when its mirror image is a vertex of the convex hull of all mirror
images together with the viewpoint.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..errors import GeometryError, ValidationError
from .camera import PointCloud

DEFAULT_GAMMA = 100.0
_RANK_TOL = 1e-9


def spherical_flip(rel: np.ndarray, radius: float) -> np.ndarray:
    """Mirror viewpoint-relative points through the sphere of the given radius."""
    norm = np.linalg.norm(rel, axis=1, keepdims=True)
    return rel + 2.0 * (radius - norm) * rel / norm


def _hull_vertices(pts: np.ndarray) -> np.ndarray:
    """Indices of convex hull vertices, handling flat and collinear inputs."""
    centered = pts - pts.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    rank = int(np.sum(s > _RANK_TOL * max(s[0], 1e-300))) if len(s) else 0
    if rank == 0:
        return np.arange(len(pts))
    if rank == 1:
        x = centered @ vt[0]
        return np.unique([int(np.argmin(x)), int(np.argmax(x))])
    proj = centered @ vt[:rank].T if rank < 3 else pts
    try:
        return np.sort(ConvexHull(proj).vertices)
    except QhullError:
        # nearly flat input that slipped past the rank test
        return np.sort(ConvexHull(centered @ vt[:2].T).vertices)


def hidden_point_removal(cloud: PointCloud, viewpoint, gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    """Sorted indices of the points visible from ``viewpoint``.

    The flipping radius is ``gamma * max |p - viewpoint|``. Points that coincide
    with the viewpoint cannot be flipped and are reported hidden; duplicate
    points share their visibility.
    """
    if len(cloud) == 0:
        raise ValidationError("hidden point removal needs a non-empty cloud")
    if not gamma > 0:
        raise ValidationError(f"gamma must be > 0, got {gamma}")
    rel = cloud.points - np.asarray(viewpoint, dtype=float).reshape(3)
    dist = np.linalg.norm(rel, axis=1)
    usable = np.flatnonzero(dist > 0.0)
    if len(usable) == 0:
        raise GeometryError("every point coincides with the viewpoint")
    flipped = spherical_flip(rel[usable], gamma * dist.max())
    uniq, inverse = np.unique(flipped, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    hull_pts = np.vstack([uniq, np.zeros((1, 3))])
    verts = _hull_vertices(hull_pts)
    on_hull = np.zeros(len(hull_pts), dtype=bool)
    on_hull[verts] = True
    return usable[on_hull[:-1][inverse]]
