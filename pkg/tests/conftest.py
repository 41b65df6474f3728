"""Shared fixtures and scene builders for the test suite."""
from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from mrlayout.perception import CameraModel, Detection2D
from mrlayout.scene import Box3, PhysicalEntity, Scene, UiElement, UserPose, Vec3, load_scene

sys.path.insert(0, str(Path(__file__).parent))

GOLDEN = Path(__file__).parent / "golden"


def lecture_text() -> str:
    return resources.files("mrlayout").joinpath("data", "lecture_room.json").read_text("utf-8")


@pytest.fixture(scope="session")
def lecture() -> Scene:
    return load_scene(lecture_text())


def entity(eid, center, half, o=0.5, i=0.5, label="box") -> PhysicalEntity:
    return PhysicalEntity(eid, label, Box3(Vec3.of(center), Vec3.of(half)), o, i)


def element(eid="e", w=0.3, h=0.2, f=1.0) -> UiElement:
    return UiElement(eid, eid, w, h, f)


def pose(eye=(0.0, 0.0, 0.0), forward=(0.0, 0.0, -1.0), up=(0.0, 1.0, 0.0)) -> UserPose:
    return UserPose.looking(eye, forward, up)


def scene(entities=(), elements=(), user=None) -> Scene:
    return Scene(user or pose(), tuple(entities), tuple(elements))


def look_at(eye, target, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """Camera-to-world pose (OpenCV axes: x right, y down, z forward)."""
    eye = np.asarray(eye, dtype=float)
    z = np.asarray(target, dtype=float) - eye
    z /= np.linalg.norm(z)
    x = np.cross(z, -np.asarray(up, dtype=float))
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    T = np.eye(4)
    T[:3, 0], T[:3, 1], T[:3, 2], T[:3, 3] = x, y, z, eye
    return T


def box_surface(rng, center, half, n) -> np.ndarray:
    """``n`` points uniformly spread over the six faces of a box."""
    face = rng.integers(0, 6, n)
    u = rng.uniform(-1.0, 1.0, (n, 3))
    u[np.arange(n), face // 2] = np.where(face % 2 == 0, -1.0, 1.0)
    return np.asarray(center) + u * np.asarray(half)


def box_fixture(seed: int, n_box: int = 500, n_out: int = 50):
    """Box-shaped cloud plus far outliers, a camera looking at it and a detection.

    Outliers keep at least 0.5 m from the box surface. Returns
    ``(points, camera, detection, true_box)``.
    """
    rng = np.random.default_rng(seed)
    c = np.array([0.0, 0.5, -2.0]) + rng.uniform(-0.2, 0.2, 3)
    h = rng.uniform(0.12, 0.2, 3)
    pts = box_surface(rng, c, h, n_box)
    out = []
    while len(out) < n_out:
        q = c + rng.uniform(-1.5, 1.5, 3)
        if np.linalg.norm(np.maximum(np.abs(q - c) - h, 0.0)) > 0.5:
            out.append(q)
    cam = CameraModel(500.0, 500.0, 320.0, 240.0, 640, 480, look_at(c + np.array([0.8, 1.0, 1.6]), c))
    u, v = cam.project(c)[0]
    det = Detection2D("cup", 0.9, (u - 150, v - 150, u + 150, v + 150))
    return np.vstack([pts, np.array(out)]), cam, det, Box3(Vec3.of(c), Vec3.of(h))


def mock_fixture_records(image: str, instances: int, seed: int = 0) -> list[dict]:
    """Seeded canned replies rating one area in both modes."""
    rng = np.random.default_rng(seed)
    reasons = ["functionality of the cup", "aesthetics", "social reasons", "health and safety", "other"]
    out = []
    for mode, lo, hi in (("overlay", 1, 3), ("interaction", 1, 4)):
        for s in range(instances):
            score = int(rng.integers(lo, hi + 1))
            out.append({"image": image, "mode": mode, "seed": s,
                        "response": f"Area 1: {score}, {reasons[int(rng.integers(0, 5))]}\n"})
    return out


def pipeline_inputs(directory: Path, instances: int = 42) -> dict[str, Path]:
    """Input files for segment -> rate -> optimize -> render in ``directory``."""
    import json

    pts, cam, det, _ = box_fixture(0)
    d = Path(directory)
    paths = {k: d / n for k, n in [("cloud", "cloud.xyz"), ("camera", "camera.json"),
                                    ("detections", "detections.json"), ("areas", "areas.json"),
                                    ("fixtures", "fixtures.json"), ("scene", "scene.json"),
                                    ("links", "links.json")]}
    paths["cloud"].write_text("".join(f"{x!r} {y!r} {z!r}\n" for x, y, z in pts.tolist()))
    paths["camera"].write_text(json.dumps({
        "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy, "width": cam.width, "height": cam.height,
        "pose": cam.pose.tolist()}))
    paths["detections"].write_text(json.dumps([{"label": det.label, "confidence": det.confidence,
                                                "box": list(det.box)}]))
    paths["areas"].write_text(json.dumps({"image": "frame0", "areas": [{"index": 1, "box": [10, 10, 50, 50]}]}))
    paths["links"].write_text(json.dumps({"1": "cup-1"}))
    paths["fixtures"].write_text(json.dumps(mock_fixture_records("frame0", instances)))
    paths["scene"].write_text(json.dumps({
        "user": {"eye": [0.0, 1.2, 0.0], "forward": [0.0, 0.0, -1.0], "up": [0.0, 1.0, 0.0]},
        "entities": [],
        "elements": [{"id": "panel", "name": "Panel", "width": 0.3, "height": 0.2, "interaction_frequency": 0.2},
                     {"id": "keys", "name": "Keys", "width": 0.2, "height": 0.1, "interaction_frequency": 1.0}],
    }))
    return paths


def run_pipeline(paths: dict[str, Path], out: Path, instances: int = 42) -> dict[str, Path]:
    """Run the four commands; returns the produced files. Raises on a nonzero exit."""
    from mrlayout.cli import main

    out = Path(out)
    files = {k: out / n for k, n in [("entities", "entities.json"), ("overlay", "overlay.json"),
                                      ("rated1", "rated1.json"), ("interaction", "interaction.json"),
                                      ("rated2", "rated2.json"), ("layout", "layout.json"),
                                      ("report", "report.json"), ("svg", "layout.svg"),
                                      ("camera_svg", "camera.svg")]}
    steps = [
        ["segment", paths["cloud"], paths["camera"], paths["detections"], "--out", files["entities"]],
        ["rate", "frame0", paths["areas"], "--mode", "overlay", "--instances", instances,
         "--fixtures", paths["fixtures"], "--links", paths["links"], "--entities", files["entities"],
         "--entities-out", files["rated1"], "--out", files["overlay"]],
        ["rate", "frame0", paths["areas"], "--mode", "interaction", "--instances", instances,
         "--fixtures", paths["fixtures"], "--links", paths["links"], "--entities", files["rated1"],
         "--entities-out", files["rated2"], "--out", files["interaction"]],
        ["optimize", paths["scene"], "--entities", files["rated2"], "--seed", 0, "--restarts", 2,
         "--iterations", 400, "--out", files["layout"], "--report", files["report"]],
        ["render", paths["scene"], files["layout"], "--entities", files["rated2"], "--out", files["svg"]],
        ["render", paths["scene"], files["layout"], "--entities", files["rated2"], "--view", "camera",
         "--out", files["camera_svg"]],
    ]
    for argv in steps:
        rc = main([str(a) for a in argv])
        if rc != 0:
            raise RuntimeError(f"{argv[0]} exited with {rc}")
    return files
