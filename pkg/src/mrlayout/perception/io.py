"""Readers for point clouds (ASCII XYZ, ASCII PLY), camera and detection files."""
from __future__ import annotations

import math

import numpy as np

from ..errors import FormatError, ValidationError
from ..scene import _build, _parse_json
from .camera import CameraModel, Detection2D, PointCloud


def _floats(tokens: list[str], lineno: int) -> list[float]:
    try:
        vals = [float(t) for t in tokens]
    except ValueError:
        raise FormatError(f"expected numbers, got {' '.join(tokens)!r}", f"line {lineno}") from None
    if not all(math.isfinite(v) for v in vals):
        raise FormatError("non-finite coordinate", f"line {lineno}")
    return vals


def load_xyz(text: str) -> PointCloud:
    """One ``x y z`` point per line; blank lines and ``#`` comments are skipped."""
    pts = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.replace(",", " ").split()
        if len(tokens) != 3:
            raise FormatError(f"expected 3 coordinates, got {len(tokens)}", f"line {lineno}")
        pts.append(_floats(tokens, lineno))
    return PointCloud(np.array(pts, dtype=float).reshape(-1, 3))


_PLY_FLOATS = {"float", "float32", "double", "float64"}


def load_ply(text: str) -> PointCloud:
    """ASCII 1.0 PLY with float x/y/z vertex properties; other elements are ignored."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise FormatError("missing 'ply' magic", "line 1")
    elements: list[tuple[str, int, list[tuple[str, str]]]] = []
    body = None
    for lineno, raw in enumerate(lines[1:], 2):
        tokens = raw.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        key = tokens[0]
        if key == "format":
            if tokens[1:] != ["ascii", "1.0"]:
                raise FormatError(f"unsupported PLY format {' '.join(tokens[1:])!r}", f"line {lineno}")
        elif key == "element":
            if len(tokens) != 3 or not tokens[2].isdigit():
                raise FormatError("malformed element line", f"line {lineno}")
            elements.append((tokens[1], int(tokens[2]), []))
        elif key == "property":
            if not elements:
                raise FormatError("property before any element", f"line {lineno}")
            if tokens[1] == "list":
                elements[-1][2].append((tokens[-1], "list"))
            elif len(tokens) == 3:
                elements[-1][2].append((tokens[2], tokens[1]))
            else:
                raise FormatError("malformed property line", f"line {lineno}")
        elif key == "end_header":
            body = lineno
            break
        else:
            raise FormatError(f"unexpected header keyword {key!r}", f"line {lineno}")
    if body is None:
        raise FormatError("missing end_header")
    cursor = body  # index into ``lines`` of the first body line
    pts = None
    for name, count, props in elements:
        if name != "vertex":
            cursor += count
            continue
        kinds = dict(props)
        for axis in ("x", "y", "z"):
            if kinds.get(axis) not in _PLY_FLOATS:
                raise FormatError(f"vertex property {axis!r} must be a float type")
        if any(kind == "list" for _, kind in props):
            raise FormatError("list properties on vertices are not supported")
        cols = [[p for p, _ in props].index(a) for a in ("x", "y", "z")]
        rows = []
        for k in range(count):
            lineno = cursor + k + 1
            if cursor + k >= len(lines):
                raise FormatError(f"expected {count} vertices, file ends after {k}", f"line {lineno - 1}")
            tokens = lines[cursor + k].split()
            if len(tokens) != len(props):
                raise FormatError(f"expected {len(props)} values, got {len(tokens)}", f"line {lineno}")
            vals = _floats(tokens, lineno)
            rows.append([vals[c] for c in cols])
        pts = np.array(rows, dtype=float).reshape(-1, 3)
        cursor += count
    if pts is None:
        raise FormatError("no vertex element")
    return PointCloud(pts)


def load_cloud(text: str, name: str = "") -> PointCloud:
    """Dispatch on the file name suffix, or sniff the PLY magic."""
    if name.lower().endswith(".ply") or text.lstrip().startswith("ply"):
        return load_ply(text)
    return load_xyz(text)


def load_camera(text: str) -> CameraModel:
    """``{fx, fy, cx, cy, width, height, pose}``; pose is 4x4 row-major (nested or flat)."""
    f = _parse_json(text).obj(("fx", "fy", "cx", "cy", "width", "height", "pose"))
    nums = {k: f[k].number() for k in ("fx", "fy", "cx", "cy", "width", "height")}
    for k in ("width", "height"):
        if not float(nums[k]).is_integer():
            raise FormatError("expected an integer", f[k].path)
    items = f["pose"].list()
    if len(items) == 4 and all(isinstance(i.value, list) for i in items):
        rows = [i.list() for i in items]
        if any(len(r) != 4 for r in rows):
            raise FormatError("pose rows must have 4 entries", "pose")
        flat = [c.number() for r in rows for c in r]
    elif len(items) == 16:
        flat = [c.number() for c in items]
    else:
        raise FormatError("pose must be 4x4 (nested rows or 16 numbers)", "pose")
    return _build("pose", CameraModel, nums["fx"], nums["fy"], nums["cx"], nums["cy"],
                  int(nums["width"]), int(nums["height"]), np.array(flat).reshape(4, 4))


def load_detections(text: str, cam: CameraModel | None = None) -> list[Detection2D]:
    out = []
    for d in _parse_json(text).list():
        f = d.obj(("label", "confidence", "box"))
        box = f["box"].list()
        if len(box) != 4:
            raise FormatError("box must be [xmin, ymin, xmax, ymax]", f["box"].path)
        det = _build(d.path, Detection2D, f["label"].string(), f["confidence"].number(),
                     tuple(b.number() for b in box))
        if cam is not None:
            try:
                det.check_inside(cam)
            except ValidationError as exc:
                raise FormatError(str(exc), d.path) from exc
        out.append(det)
    return out
