"""From 2D detections, a point cloud and a camera pose to labeled 3D boxes."""
from .camera import (PLANE_NAMES, CameraModel, Detection2D, Frustum, PointCloud, frustum_from_detection,
                     points_in_frustum)
from .dbscan import NOISE, Clustering, dbscan
from .hpr import hidden_point_removal, spherical_flip
from .io import load_camera, load_cloud, load_detections, load_ply, load_xyz
from .segment import SegmentParams, Segmentation, fit_box, iou, merge_detection, segment, segment_box

__all__ = [
    "PLANE_NAMES", "CameraModel", "Detection2D", "Frustum", "PointCloud", "frustum_from_detection",
    "points_in_frustum", "NOISE", "Clustering", "dbscan", "hidden_point_removal", "spherical_flip",
    "load_camera", "load_cloud", "load_detections", "load_ply", "load_xyz", "SegmentParams",
    "Segmentation", "fit_box", "iou", "merge_detection", "segment", "segment_box",
]
