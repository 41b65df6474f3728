"""Element rasterization and ray/box intersection.

Each element is a rectangle billboarded toward the user's eye. It is sampled on
an evenly spaced grid, and one ray is cast from the eye through every sample.
A ray's hit set holds one entry point per intersected box. Each hit also
carries its normalized distance to the box center,
``d_h = |h - c_b| / (0.5 * d_b)``, which is 1 at the corners.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import GeometryError, ValidationError
from .scene import UNIT_TOL, Box3, Scene, UiElement, UserPose, Vec3

PARALLEL_EPS = 1e-9
DEFAULT_GRID = 5
_DEGENERATE = 1e-12


@dataclass(frozen=True)
class Ray:
    origin: Vec3
    dir: Vec3

    def __post_init__(self) -> None:
        if abs(self.dir.norm() - 1.0) > UNIT_TOL:
            raise ValidationError("Ray.dir must be unit length")


@dataclass(frozen=True)
class Hit:
    point: Vec3
    entity_id: str
    d_h: float
    t: float


@dataclass(frozen=True)
class RayHits:
    """Hit sets per ray index plus the rays that could not be cast."""

    hits: dict[int, list[Hit]]
    skipped: tuple[int, ...] = field(default=())


# --------------------------------------------------------------------------
# billboard frames


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product over the last axis (cheaper than np.cross for tiny arrays)."""
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


@lru_cache(maxsize=256)
def grid_offsets(width: float, height: float, grid_n: int) -> np.ndarray:
    """(grid_n**2, 2) in-plane offsets, rows bottom-to-top, columns left-to-right."""
    if grid_n < 1:
        raise ValidationError(f"grid_n must be >= 1, got {grid_n}")
    if grid_n == 1:
        out = np.zeros((1, 2))
    else:
        u = np.linspace(-width / 2.0, width / 2.0, grid_n)
        v = np.linspace(-height / 2.0, height / 2.0, grid_n)
        vv, uu = np.meshgrid(v, u, indexing="ij")
        out = np.column_stack([uu.ravel(), vv.ravel()])
    out.flags.writeable = False
    return out


def billboard_frames(positions: np.ndarray, user: UserPose) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Normal/right/up axes for elements at ``positions`` (P, 3) facing the eye.

    Returns ``(normal, right, up, ok)``; ``ok`` is False where the element sits
    on the eye and the frame is undefined.
    """
    to_eye = user.eye.array() - positions
    dist = np.sqrt((to_eye * to_eye).sum(-1))
    ok = dist > _DEGENERATE
    n = to_eye / np.where(ok, dist, 1.0)[..., None]
    right = cross(np.broadcast_to(user.up.array(), n.shape), n)
    rn = np.sqrt((right * right).sum(-1))
    use_alt = rn < 1e-9
    if use_alt.any():
        # looking straight up or down: fall back to the forward vector as reference
        alt = cross(np.broadcast_to(user.forward.array(), n.shape), n)
        right = np.where(use_alt[..., None], alt, right)
        rn = np.sqrt((right * right).sum(-1))
    right = right / np.where(rn > 0, rn, 1.0)[..., None]
    return n, right, cross(n, right), ok


def sample_grid(positions: np.ndarray, user: UserPose, width: float, height: float,
                grid_n: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample points (P, G, 3) on billboarded rectangles, and the ``ok`` mask (P,)."""
    offs = grid_offsets(float(width), float(height), int(grid_n))
    _, right, up, ok = billboard_frames(positions, user)
    pts = (positions[:, None, :]
           + offs[None, :, 0:1] * right[:, None, :]
           + offs[None, :, 1:2] * up[:, None, :])
    return pts, ok


def rasterize_element(element: UiElement, position: Vec3, user: UserPose,
                      grid_n: int = DEFAULT_GRID) -> list[Vec3]:
    """Evenly spaced samples on the element rectangle, corners included for grid_n >= 2."""
    pts, ok = sample_grid(position.array()[None, :], user, element.width, element.height, grid_n)
    if not ok[0]:
        raise GeometryError(f"element {element.id!r} is placed at the eye")
    return [Vec3.of(p) for p in pts[0]]


# --------------------------------------------------------------------------
# slab method


def slab(o: np.ndarray, d: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis slab parameters ``(tnear, tfar)`` for rays against centered boxes.

    ``o`` is the ray origin in box-local coordinates, ``d`` the direction and
    ``h`` the half extents, all broadcastable to (..., 3). Axis-parallel
    components (``|d| < PARALLEL_EPS``) are inside the slab for all t when the
    origin lies within it (boundaries inclusive), and never otherwise.
    """
    parallel = np.abs(d) < PARALLEL_EPS
    if parallel.any():
        inv = 1.0 / np.where(parallel, 1.0, d)
        t1 = (-h - o) * inv
        t2 = (h - o) * inv
        inside = np.abs(o) <= h
        tnear = np.where(parallel, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
        tfar = np.where(parallel, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
    else:
        inv = 1.0 / d
        t1 = (-h - o) * inv
        t2 = (h - o) * inv
        tnear = np.minimum(t1, t2)
        tfar = np.maximum(t1, t2)
    return tnear, tfar


def entry_distances(o: np.ndarray, dirs: np.ndarray, halves: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hit parameter and normalized center distance for R rays against B boxes.

    ``o`` (B, 3) is the shared ray origin relative to each box center, ``dirs``
    (R, 3) are unit directions. Returns ``(t, d_h)`` of shape (R, B), NaN-free;
    ``t`` is +inf on a miss. Used on the optimizer's hot path.
    """
    d = dirs[:, None, :]
    tnear, tfar = slab(o[None, :, :], d, halves[None, :, :])
    t_enter = tnear.max(-1)
    t_exit = tfar.min(-1)
    hit = (t_exit >= t_enter) & (t_exit > 0.0)
    t = np.where(hit, np.where(t_enter > 0.0, t_enter, t_exit), np.inf)
    local = o[None, :, :] + np.where(hit, t, 0.0)[..., None] * d
    local = np.clip(local, -halves, halves)
    dh = np.minimum(np.sqrt((local * local).sum(-1)) / np.sqrt((halves * halves).sum(-1)), 1.0)
    return t, dh


def box_hits(origins: np.ndarray, dirs: np.ndarray, centers: np.ndarray,
             halves: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Intersect R rays with B axis-aligned boxes, with exact surface points.

    ``origins``/``dirs`` are (R, 3) with unit ``dirs``; ``centers``/``halves``
    (B, 3). Returns ``(t, d_h, local)`` of shapes (R, B), (R, B), (R, B, 3):
    ``t`` is NaN on a miss and ``local`` is the hit point relative to the box
    center, snapped onto the face it lies on. A ray starting inside a box
    reports that box's exit point.
    """
    o = origins[:, None, :] - centers[None, :, :]
    d = np.broadcast_to(dirs[:, None, :], o.shape)
    h = np.broadcast_to(halves[None, :, :], o.shape)
    tnear, tfar = slab(o, d, h)
    enter_axis = np.argmax(tnear, axis=-1)
    exit_axis = np.argmin(tfar, axis=-1)
    t_enter = np.take_along_axis(tnear, enter_axis[..., None], -1)[..., 0]
    t_exit = np.take_along_axis(tfar, exit_axis[..., None], -1)[..., 0]
    hit = (t_exit >= t_enter) & (t_exit > 0.0)
    entering = t_enter > 0.0
    t = np.where(hit, np.where(entering, t_enter, t_exit), np.nan)

    local = np.clip(o + np.where(hit, t, 0.0)[..., None] * d, -h, h)
    axis = np.where(entering, enter_axis, exit_axis)
    d_ax = np.take_along_axis(d, axis[..., None], -1)[..., 0]
    h_ax = np.take_along_axis(h, axis[..., None], -1)[..., 0]
    face = np.where(entering, -np.sign(d_ax), np.sign(d_ax)) * h_ax
    np.put_along_axis(local, axis[..., None], face[..., None], -1)
    dh = np.linalg.norm(local, axis=-1) / np.linalg.norm(h, axis=-1)
    dh = np.where(hit, np.minimum(dh, 1.0), np.nan)
    return t, dh, local


def _box_arrays(boxes: list[Box3]) -> tuple[np.ndarray, np.ndarray]:
    if not boxes:
        return np.zeros((0, 3)), np.ones((0, 3))
    return (np.array([b.center.array() for b in boxes]),
            np.array([b.half_extents.array() for b in boxes]))


def ray_box_entry(ray: Ray, box: Box3, entity_id: str = "") -> Hit | None:
    """Nearest surface hit of ``ray`` on ``box``, or None on a miss."""
    c, hx = _box_arrays([box])
    t, dh, local = box_hits(ray.origin.array()[None, :], ray.dir.array()[None, :], c, hx)
    if np.isnan(t[0, 0]):
        return None
    return Hit(Vec3.of(c[0] + local[0, 0]), entity_id, float(dh[0, 0]), float(t[0, 0]))


def eye_rays(eye: np.ndarray, samples: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit directions and lengths of eye -> sample rays; ``ok`` False for zero-length rays."""
    v = samples - eye
    length = np.sqrt((v * v).sum(-1))
    ok = length > _DEGENERATE
    dirs = v / np.where(ok, length, 1.0)[..., None]
    return dirs, length, ok


def collect_hits(scene: Scene, element: UiElement, position: Vec3, grid_n: int = DEFAULT_GRID,
                 clip: bool = False) -> RayHits:
    """Hit sets H(r) for every eye ray through the element's sample grid.

    With ``clip`` set, only boxes entered before the ray reaches the sample
    point count (``t <= |sample - eye|``).
    """
    eye = scene.user.eye.array()
    samples = np.array([p.array() for p in rasterize_element(element, position, scene.user, grid_n)])
    dirs, length, ok = eye_rays(eye, samples)
    skipped = tuple(int(i) for i in np.flatnonzero(~ok))
    centers, halves = _box_arrays([e.box for e in scene.entities])
    t, dh, local = box_hits(np.broadcast_to(eye, dirs.shape), dirs, centers, halves)
    out: dict[int, list[Hit]] = {}
    for r in range(len(samples)):
        row: list[Hit] = []
        if ok[r]:
            for b, ent in enumerate(scene.entities):
                tb = t[r, b]
                if np.isnan(tb) or (clip and tb > length[r] * (1 + 1e-12)):
                    continue
                row.append(Hit(Vec3.of(centers[b] + local[r, b]), ent.id, float(dh[r, b]), float(tb)))
        row.sort(key=lambda hit: hit.t)
        out[r] = row
    return RayHits(out, skipped)
