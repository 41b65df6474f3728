"""Pinhole camera, 2D detections and detection frusta.

Camera coordinates follow the OpenCV convention: x right, y down, z forward.
A plane is stored as an inward unit normal ``n`` and offset ``d``. The signed
distance of ``p`` is ``n . p + d``, and it is non-negative inside.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GeometryError, ValidationError

PLANE_NAMES = ("left", "right", "top", "bottom", "near", "far")


@dataclass(frozen=True)
class PointCloud:
    """World-frame points as an (N, 3) float array."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValidationError("point cloud contains non-finite coordinates")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, idx) -> PointCloud:
        return PointCloud(self.points[np.asarray(idx, dtype=int)])


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    pose: np.ndarray  # 4x4 camera -> world

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError(f"focal lengths must be > 0, got fx={self.fx}, fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("image size must be positive")
        T = np.asarray(self.pose, dtype=float)
        if T.shape != (4, 4) or not np.all(np.isfinite(T)):
            raise ValidationError("pose must be a finite 4x4 matrix")
        if not np.allclose(T[3], [0.0, 0.0, 0.0, 1.0], atol=1e-12):
            raise ValidationError("pose last row must be [0, 0, 0, 1]")
        R = T[:3, :3]
        if np.abs(R.T @ R - np.eye(3)).max() > 1e-6 or np.linalg.det(R) < 0:
            raise ValidationError("pose rotation must be orthonormal and right-handed (within 1e-6)")
        T = T.copy()
        T.flags.writeable = False
        object.__setattr__(self, "pose", T)

    @property
    def rotation(self) -> np.ndarray:
        return self.pose[:3, :3]

    @property
    def center(self) -> np.ndarray:
        return self.pose[:3, 3]

    def ray(self, u: float, v: float) -> np.ndarray:
        """Camera-frame direction through pixel (u, v), scaled to z = 1."""
        return np.array([(u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0])

    def backproject(self, u: float, v: float, depth: float) -> np.ndarray:
        """World point at camera depth ``depth`` along pixel (u, v)."""
        return self.rotation @ (self.ray(u, v) * depth) + self.center

    def project(self, world: np.ndarray) -> np.ndarray:
        """Pixel coordinates (N, 2) and depth of world points; camera-frame z <= 0 gives nan."""
        pc = (np.asarray(world, dtype=float).reshape(-1, 3) - self.center) @ self.rotation
        z = pc[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(z > 0, self.fx * pc[:, 0] / z + self.cx, np.nan)
            v = np.where(z > 0, self.fy * pc[:, 1] / z + self.cy, np.nan)
        return np.column_stack([u, v])


@dataclass(frozen=True)
class Detection2D:
    label: str
    confidence: float
    box: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax in pixels

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence must lie in [0, 1], got {self.confidence}")
        box = tuple(float(v) for v in self.box)
        if len(box) != 4 or not all(np.isfinite(box)):
            raise ValidationError("detection box must be 4 finite numbers")
        if not (box[0] < box[2] and box[1] < box[3]):
            raise ValidationError(f"degenerate detection rectangle {box}")
        object.__setattr__(self, "box", box)

    def check_inside(self, cam: CameraModel) -> None:
        x0, y0, x1, y1 = self.box
        if x0 < 0 or y0 < 0 or x1 > cam.width or y1 > cam.height:
            raise ValidationError(f"detection rectangle {self.box} leaves the {cam.width}x{cam.height} image")


@dataclass(frozen=True)
class Frustum:
    """Six inward planes in ``PLANE_NAMES`` order plus the eight corner points."""

    normals: np.ndarray  # (6, 3)
    offsets: np.ndarray  # (6,)
    corners: np.ndarray  # (8, 3): near rectangle then far rectangle

    def signed_distances(self, points: np.ndarray) -> np.ndarray:
        """(N, 6) signed distances of ``points`` to every plane."""
        return np.asarray(points, dtype=float).reshape(-1, 3) @ self.normals.T + self.offsets

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.all(self.signed_distances(points) >= 0.0, axis=1)

    @property
    def centroid(self) -> np.ndarray:
        return self.corners.mean(axis=0)


def _unit(n: np.ndarray) -> np.ndarray:
    return n / np.linalg.norm(n)


def frustum_from_detection(cam: CameraModel, det: Detection2D, near: float = 0.2,
                           far: float = 10.0) -> Frustum:
    """Frustum spanned by back-projecting the detection rectangle between two depths."""
    if not 0 < near < far:
        raise ValidationError(f"need 0 < near < far, got near={near}, far={far}")
    det.check_inside(cam)
    x0, y0, x1, y1 = det.box
    a0, a1 = (x0 - cam.cx) / cam.fx, (x1 - cam.cx) / cam.fx
    b0, b1 = (y0 - cam.cy) / cam.fy, (y1 - cam.cy) / cam.fy
    if not (a0 < a1 and b0 < b1):
        raise GeometryError("degenerate detection rectangle")
    # camera-frame planes; x >= a0 z is the left side, y >= b0 z the top (y points down)
    n_cam = np.array([
        _unit(np.array([1.0, 0.0, -a0])),
        _unit(np.array([-1.0, 0.0, a1])),
        _unit(np.array([0.0, 1.0, -b0])),
        _unit(np.array([0.0, -1.0, b1])),
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ])
    off_cam = np.array([0.0, 0.0, 0.0, 0.0, -near, far])
    R, t = cam.rotation, cam.center
    normals = n_cam @ R.T
    offsets = off_cam - normals @ t
    rect = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    corners = np.array([cam.backproject(u, v, z) for z in (near, far) for u, v in rect])
    return Frustum(normals, offsets, corners)


def points_in_frustum(cloud: PointCloud, frustum: Frustum) -> PointCloud:
    """Points with non-negative signed distance to every frustum plane, input order kept."""
    if len(cloud) == 0:
        return cloud
    return cloud.subset(np.flatnonzero(frustum.contains(cloud.points)))
