"""Density-based clustering (DBSCAN) with a deterministic labeling rule.

A point is a core point when at least ``min_pts`` points, itself included,
lie within ``eps`` (inclusive). Clusters are numbered in the order of their
first core point in the input. A border point reachable from several clusters
joins the one formed first.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..errors import ValidationError
from .camera import PointCloud

NOISE = -1


@dataclass(frozen=True)
class Clustering:
    labels: np.ndarray  # (N,) cluster index or NOISE
    core: np.ndarray  # (N,) bool

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    @property
    def clusters(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == c) for c in range(self.n_clusters)]

    @property
    def noise(self) -> np.ndarray:
        return np.flatnonzero(self.labels == NOISE)


def neighborhoods(points: np.ndarray, eps: float) -> list[np.ndarray]:
    """Sorted indices within ``eps`` of each point (itself included)."""
    tree = cKDTree(points)
    # query slightly wide, then apply the exact inclusive test
    cand = tree.query_ball_point(points, eps * (1.0 + 1e-9) + 1e-300)
    out = []
    for i, idx in enumerate(cand):
        idx = np.asarray(sorted(idx), dtype=int)
        d = np.sqrt(((points[idx] - points[i]) ** 2).sum(axis=1))
        out.append(idx[d <= eps])
    return out


def dbscan(cloud: PointCloud, eps: float = 0.1, min_pts: int = 10) -> Clustering:
    if not eps > 0:
        raise ValidationError(f"eps must be > 0, got {eps}")
    if min_pts < 1:
        raise ValidationError(f"min_pts must be >= 1, got {min_pts}")
    n = len(cloud)
    labels = np.full(n, NOISE, dtype=int)
    if n == 0:
        return Clustering(labels, np.zeros(0, dtype=bool))
    nbrs = neighborhoods(cloud.points, eps)
    core = np.array([len(nb) >= min_pts for nb in nbrs], dtype=bool)
    cluster = 0
    for i in range(n):
        if not core[i] or labels[i] != NOISE:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            j = queue.popleft()
            for k in nbrs[j]:
                if labels[k] == NOISE:
                    labels[k] = cluster
                    if core[k]:
                        queue.append(k)
        cluster += 1
    return Clustering(labels, core)
