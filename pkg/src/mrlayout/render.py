"""Static SVG views of a scene and layout: top-down (x/z) or from the user's eye.

Output is byte-deterministic: fixed drawing order and fixed number formatting.
"""
from __future__ import annotations

import math
from html import escape

import numpy as np

from .errors import ValidationError
from .geometry import billboard_frames
from .scene import Layout, Scene

WIDTH, HEIGHT = 800, 600
_MARGIN = 40.0
_CAMERA_HFOV = math.radians(90.0)
_NEAR = 0.05


def _f(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def rating_color(o: float | None) -> str:
    """Red (0) to green (1); grey when unrated."""
    if o is None:
        return "#9e9e9e"
    r, g = round(220 * (1.0 - o)), round(200 * o)
    return f"#{r:02x}{g:02x}30"


def _svg(body: list[str], title: str) -> str:
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _element_corners(scene: Scene, layout: Layout) -> list[tuple[str, np.ndarray]]:
    if not scene.elements:
        return []
    X = layout.as_array(scene)
    _, right, up, ok = billboard_frames(X, scene.user)
    out = []
    for k, e in enumerate(scene.elements):
        if not ok[k]:
            continue
        hw, hh = e.width / 2.0, e.height / 2.0
        c = X[k]
        corners = np.array([c - hw * right[k] - hh * up[k], c + hw * right[k] - hh * up[k],
                            c + hw * right[k] + hh * up[k], c - hw * right[k] + hh * up[k]])
        out.append((e.id, corners))
    return out


def render_top(scene: Scene, layout: Layout | None = None) -> str:
    layout = layout if layout is not None else Layout({})
    elems = _element_corners(scene, layout) if layout.positions else []
    eye = scene.user.eye.array()
    pts = [eye[[0, 2]] + d for d in ((-0.5, -0.5), (0.5, 0.5))]
    for ent in scene.entities:
        pts += [ent.box.lo[[0, 2]], ent.box.hi[[0, 2]]]
    for _, cs in elems:
        pts += list(cs[:, [0, 2]])
    P = np.array(pts)
    lo, hi = P.min(axis=0), P.max(axis=0)
    scale = min((WIDTH - 2 * _MARGIN) / (hi[0] - lo[0]), (HEIGHT - 2 * _MARGIN) / (hi[1] - lo[1]))

    def to_px(x: float, z: float) -> tuple[float, float]:
        return _MARGIN + (x - lo[0]) * scale, _MARGIN + (z - lo[1]) * scale

    body = []
    for ent in scene.entities:
        x0, y0 = to_px(ent.box.lo[0], ent.box.lo[2])
        x1, y1 = to_px(ent.box.hi[0], ent.box.hi[2])
        body.append(f'<rect class="entity" data-id="{escape(ent.id)}" x="{_f(x0)}" y="{_f(y0)}" '
                    f'width="{_f(x1 - x0)}" height="{_f(y1 - y0)}" fill="{rating_color(ent.overlay_rating)}" '
                    f'fill-opacity="0.6" stroke="#333333"/>')
        body.append(f'<text x="{_f(x0 + 2)}" y="{_f(y0 + 12)}" font-size="11">{escape(ent.label)}</text>')
    for eid, cs in elems:
        # a billboard seen from above is its bottom edge
        (ax, ay), (bx, by) = to_px(cs[0, 0], cs[0, 2]), to_px(cs[1, 0], cs[1, 2])
        body.append(f'<line class="element" data-id="{escape(eid)}" x1="{_f(ax)}" y1="{_f(ay)}" '
                    f'x2="{_f(bx)}" y2="{_f(by)}" stroke="#1565c0" stroke-width="3"/>')
        body.append(f'<text x="{_f(bx + 3)}" y="{_f(by)}" font-size="11" fill="#1565c0">{escape(eid)}</text>')
    ex, ey = to_px(eye[0], eye[2])
    f = scene.user.forward.array()
    fx, fy = to_px(eye[0] + 0.3 * f[0], eye[2] + 0.3 * f[2])
    body.append(f'<g class="user"><circle cx="{_f(ex)}" cy="{_f(ey)}" r="6" fill="#000000"/>'
                f'<line x1="{_f(ex)}" y1="{_f(ey)}" x2="{_f(fx)}" y2="{_f(fy)}" stroke="#000000" '
                f'stroke-width="2"/></g>')
    return _svg(body, "top view")


def _hull_2d(pts: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull, counter-clockwise."""
    P = sorted(map(tuple, np.round(pts, 9)))
    if len(P) <= 2:
        return np.array(P)

    def half(seq):
        out: list[tuple] = []
        for p in seq:
            while len(out) >= 2 and ((out[-1][0] - out[-2][0]) * (p[1] - out[-2][1])
                                     - (out[-1][1] - out[-2][1]) * (p[0] - out[-2][0])) <= 0:
                out.pop()
            out.append(p)
        return out

    lower, upper = half(P), half(reversed(P))
    return np.array(lower[:-1] + upper[:-1])


# box edges as corner index pairs (corners ordered by x, y, z bits)
_EDGES = [(a, a | bit) for a in range(8) for bit in (1, 2, 4) if not a & bit]


def _clip_near(corners: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Corners in front of the near plane plus edge crossings of it."""
    pts = [corners[z > _NEAR]]
    for a, b in _EDGES:
        if (z[a] > _NEAR) != (z[b] > _NEAR):
            t = (_NEAR - z[a]) / (z[b] - z[a])
            pts.append((corners[a] + t * (corners[b] - corners[a]))[None])
    return np.vstack(pts)


def render_camera(scene: Scene, layout: Layout | None = None) -> str:
    layout = layout if layout is not None else Layout({})
    u = scene.user
    eye, fwd, up = u.eye.array(), u.forward.array(), u.up.array()
    right = np.cross(fwd, up)
    focal = (WIDTH / 2.0) / math.tan(_CAMERA_HFOV / 2.0)

    def project(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rel = P - eye
        z = rel @ fwd
        with np.errstate(divide="ignore", invalid="ignore"):
            x = WIDTH / 2.0 + focal * (rel @ right) / z
            y = HEIGHT / 2.0 - focal * (rel @ up) / z
        return np.column_stack([x, y]), z

    items = []  # (depth, order, svg)
    for i, ent in enumerate(scene.entities):
        lo, hi = ent.box.lo, ent.box.hi
        corners = np.array([[(lo, hi)[a][0], (lo, hi)[b][1], (lo, hi)[c][2]]
                            for a in (0, 1) for b in (0, 1) for c in (0, 1)])
        front = _clip_near(corners, (corners - eye) @ fwd)
        if len(front) < 3:
            continue
        hull = _hull_2d(project(front)[0])
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in hull)
        depth = float((ent.box.center.array() - eye) @ fwd)
        items.append((depth, i, f'<polygon class="entity" data-id="{escape(ent.id)}" points="{pts}" '
                                f'fill="{rating_color(ent.overlay_rating)}" fill-opacity="0.6" stroke="#333333"/>'))
    n_ent = len(scene.entities)
    for k, (eid, cs) in enumerate(_element_corners(scene, layout) if layout.positions else []):
        px, z = project(cs)
        if np.any(z <= _NEAR):
            continue
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in px)
        depth = float((cs.mean(axis=0) - eye) @ fwd)
        items.append((depth, n_ent + k, f'<polygon class="element" data-id="{escape(eid)}" points="{pts}" '
                                        f'fill="none" stroke="#1565c0" stroke-width="2"/>'))
    items.sort(key=lambda t: (-t[0], t[1]))
    body = [s for _, _, s in items]
    cx, cy = WIDTH / 2.0, HEIGHT / 2.0
    body.append(f'<g class="user"><line x1="{_f(cx - 8)}" y1="{_f(cy)}" x2="{_f(cx + 8)}" y2="{_f(cy)}" '
                f'stroke="#000000"/><line x1="{_f(cx)}" y1="{_f(cy - 8)}" x2="{_f(cx)}" y2="{_f(cy + 8)}" '
                f'stroke="#000000"/></g>')
    return _svg(body, "camera view")


def render(scene: Scene, layout: Layout | None = None, view: str = "top") -> str:
    if view == "top":
        return render_top(scene, layout)
    if view == "camera":
        return render_camera(scene, layout)
    raise ValidationError(f"unknown view {view!r}; expected 'top' or 'camera'")
