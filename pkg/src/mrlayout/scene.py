"""Domain model: the user's pose, rated physical entities, virtual UI elements
and layouts, plus their JSON document formats.

World frame is right-handed, y-up, in meters. Ratings on entities are stored
normalized to [0, 1]; raw 1-5 scores only exist at the reasoning boundary.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import FormatError, ValidationError

UNIT_TOL = 1e-9


def _finite(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise ValidationError(f"{what} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{what} must be finite, got {value!r}")
    return value + 0.0  # folds -0.0 into 0.0


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "z"):
            object.__setattr__(self, name, _finite(getattr(self, name), f"Vec3.{name}"))

    @classmethod
    def of(cls, values: Iterable[float]) -> Vec3:
        vals = list(values)
        if len(vals) != 3:
            raise ValidationError(f"Vec3 needs 3 components, got {len(vals)}")
        return cls(*vals)

    def __iter__(self) -> Iterator[float]:
        return iter((self.x, self.y, self.z))

    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def __add__(self, other: Vec3) -> Vec3:
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: Vec3) -> Vec3:
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, k: float) -> Vec3:
        return Vec3(self.x * k, self.y * k, self.z * k)

    __rmul__ = __mul__

    def dot(self, other: Vec3) -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z


@dataclass(frozen=True)
class UserPose:
    """Eye position with an orthonormal forward/up pair."""

    eye: Vec3
    forward: Vec3
    up: Vec3

    def __post_init__(self) -> None:
        for name in ("forward", "up"):
            n = getattr(self, name).norm()
            if abs(n - 1.0) > UNIT_TOL:
                raise ValidationError(f"UserPose.{name} must be unit length (|v| = {n!r})")
        if abs(self.forward.dot(self.up)) > UNIT_TOL:
            raise ValidationError("UserPose.forward and UserPose.up must be orthogonal")

    @classmethod
    def looking(cls, eye: Sequence[float], forward: Sequence[float],
                up: Sequence[float] = (0.0, 1.0, 0.0)) -> UserPose:
        """Build a pose from an arbitrary (non-unit) view direction.

        ``up`` is re-orthogonalized against ``forward``.
        """
        f = np.asarray(forward, dtype=float)
        f = f / np.linalg.norm(f)
        u = np.asarray(up, dtype=float)
        u = u - f * np.dot(u, f)
        nu = np.linalg.norm(u)
        if nu < 1e-12:
            raise ValidationError("up is parallel to forward")
        return cls(Vec3.of(eye), Vec3.of(f), Vec3.of(u / nu))


@dataclass(frozen=True)
class Box3:
    """Axis-aligned box given by its center and positive half extents."""

    center: Vec3
    half_extents: Vec3

    def __post_init__(self) -> None:
        if min(self.half_extents) <= 0.0:
            raise ValidationError(f"Box3 half extents must be > 0, got {tuple(self.half_extents)}")

    @classmethod
    def from_bounds(cls, lo: Sequence[float], hi: Sequence[float]) -> Box3:
        lo_a, hi_a = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        return cls(Vec3.of((lo_a + hi_a) / 2.0), Vec3.of((hi_a - lo_a) / 2.0))

    @property
    def lo(self) -> np.ndarray:
        return self.center.array() - self.half_extents.array()

    @property
    def hi(self) -> np.ndarray:
        return self.center.array() + self.half_extents.array()

    @property
    def diagonal(self) -> float:
        return 2.0 * self.half_extents.norm()

    @property
    def volume(self) -> float:
        h = self.half_extents
        return 8.0 * h.x * h.y * h.z

    def contains(self, p: Sequence[float], tol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))


def _rating(value: float | None, what: str) -> float | None:
    if value is None:
        return None
    value = _finite(value, what)
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{what} must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class PhysicalEntity:
    """A labeled box in the surroundings with normalized suitability ratings.

    Ratings are ``None`` for freshly segmented entities that have not been rated.
    """

    id: str
    label: str
    box: Box3
    overlay_rating: float | None = None
    interaction_rating: float | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ValidationError("entity id must be a non-empty string")
        if not isinstance(self.label, str):
            raise ValidationError(f"entity {self.id!r}: label must be a string")
        object.__setattr__(self, "overlay_rating",
                           _rating(self.overlay_rating, f"entity {self.id!r} overlay_rating"))
        object.__setattr__(self, "interaction_rating",
                           _rating(self.interaction_rating, f"entity {self.id!r} interaction_rating"))

    @property
    def rated(self) -> bool:
        return self.overlay_rating is not None and self.interaction_rating is not None

    def with_box(self, box: Box3) -> PhysicalEntity:
        return replace(self, box=box)


@dataclass(frozen=True)
class UiElement:
    id: str
    name: str
    width: float
    height: float
    interaction_frequency: float = 0.0

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ValidationError("element id must be a non-empty string")
        for dim in ("width", "height"):
            v = _finite(getattr(self, dim), f"element {self.id!r} {dim}")
            if v <= 0.0:
                raise ValidationError(f"element {self.id!r}: {dim} must be > 0, got {v}")
            object.__setattr__(self, dim, v)
        f = _finite(self.interaction_frequency, f"element {self.id!r} interaction_frequency")
        if not 0.0 <= f <= 1.0:
            raise ValidationError(f"element {self.id!r}: interaction_frequency must lie in [0, 1], got {f}")
        object.__setattr__(self, "interaction_frequency", f)


def _check_unique(ids: Iterable[str], kind: str) -> None:
    seen: set[str] = set()
    for i in ids:
        if i in seen:
            raise ValidationError(f"duplicate {kind} id {i!r}")
        seen.add(i)


@dataclass(frozen=True)
class Scene:
    """The optimizer's world: user pose, rated entities, elements to place."""

    user: UserPose
    entities: tuple[PhysicalEntity, ...] = ()
    elements: tuple[UiElement, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "elements", tuple(self.elements))
        _check_unique((e.id for e in self.entities), "entity")
        _check_unique((e.id for e in self.elements), "element")
        _check_unique([e.id for e in self.entities] + [e.id for e in self.elements], "scene")
        for e in self.entities:
            if not e.rated:
                raise ValidationError(f"entity {e.id!r} has no overlay/interaction rating")

    def element(self, element_id: str) -> UiElement:
        for e in self.elements:
            if e.id == element_id:
                return e
        raise KeyError(element_id)

    def entity(self, entity_id: str) -> PhysicalEntity:
        for e in self.entities:
            if e.id == entity_id:
                return e
        raise KeyError(entity_id)

    def with_entities(self, entities: Iterable[PhysicalEntity]) -> Scene:
        return replace(self, entities=tuple(entities))


@dataclass(frozen=True)
class Layout:
    """Element id -> element center. Elements always billboard toward the eye."""

    positions: Mapping[str, Vec3] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "positions", MappingProxyType(dict(self.positions)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Layout):
            return NotImplemented
        return dict(self.positions) == dict(other.positions)

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.positions.items(), key=lambda kv: kv[0])))

    def __getitem__(self, element_id: str) -> Vec3:
        return self.positions[element_id]

    def check(self, scene: Scene) -> None:
        ids = {e.id for e in scene.elements}
        missing = [e.id for e in scene.elements if e.id not in self.positions]
        if missing:
            raise ValidationError(f"layout has no position for element(s) {missing}")
        extra = sorted(set(self.positions) - ids)
        if extra:
            raise ValidationError(f"layout has positions for unknown element(s) {extra}")

    def as_array(self, scene: Scene) -> np.ndarray:
        self.check(scene)
        return np.array([self.positions[e.id].array() for e in scene.elements]).reshape(-1, 3)

    @classmethod
    def from_array(cls, scene: Scene, positions: np.ndarray) -> Layout:
        return cls({e.id: Vec3.of(p) for e, p in zip(scene.elements, np.asarray(positions))})


def normalize_rating(score: int) -> float:
    """Map a 1-5 Likert score linearly onto [0, 1]."""
    if isinstance(score, bool) or not isinstance(score, (int, np.integer)):
        raise ValidationError(f"rating must be an integer 1..5, got {score!r}")
    if not 1 <= score <= 5:
        raise ValidationError(f"rating must lie in 1..5, got {score}")
    return (int(score) - 1) / 4.0


# --------------------------------------------------------------------------
# documents


class _Doc:
    """Strict field access over a decoded JSON value, tracking the path."""

    def __init__(self, value: Any, path: str):
        self.value = value
        self.path = path

    def obj(self, required: Sequence[str], optional: Sequence[str] = ()) -> dict[str, _Doc]:
        if not isinstance(self.value, dict):
            raise FormatError("expected an object", self.path or "$")
        unknown = sorted(set(self.value) - set(required) - set(optional))
        if unknown:
            raise FormatError(f"unknown field(s) {unknown}", self.path or "$")
        missing = [k for k in required if k not in self.value]
        if missing:
            raise FormatError(f"missing field(s) {missing}", self.path or "$")
        return {k: _Doc(v, f"{self.path}.{k}" if self.path else k) for k, v in self.value.items()}

    def list(self) -> list[_Doc]:
        if not isinstance(self.value, list):
            raise FormatError("expected a list", self.path)
        return [_Doc(v, f"{self.path}[{i}]") for i, v in enumerate(self.value)]

    def number(self) -> float:
        v = self.value
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise FormatError(f"expected a finite number, got {v!r}", self.path)
        return float(v)

    def opt_number(self) -> float | None:
        return None if self.value is None else self.number()

    def string(self) -> str:
        if not isinstance(self.value, str):
            raise FormatError(f"expected a string, got {self.value!r}", self.path)
        return self.value

    def vec(self) -> Vec3:
        items = self.list()
        if len(items) != 3:
            raise FormatError(f"expected 3 numbers, got {len(items)}", self.path)
        return Vec3(*(i.number() for i in items))


def _parse_json(text: str) -> _Doc:
    try:
        return _Doc(json.loads(text), "")
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from exc


def _build(path: str, fn, *args):
    try:
        return fn(*args)
    except ValidationError as exc:
        raise FormatError(str(exc), path) from exc


def _entity_from(doc: _Doc, require_ratings: bool) -> PhysicalEntity:
    optional = () if require_ratings else ("overlay_rating", "interaction_rating")
    required = ("id", "label", "box") + (("overlay_rating", "interaction_rating") if require_ratings else ())
    f = doc.obj(required, optional)
    b = f["box"].obj(("center", "half_extents"))
    box = _build(f["box"].path, Box3, b["center"].vec(), b["half_extents"].vec())
    o = f["overlay_rating"].opt_number() if "overlay_rating" in f else None
    i = f["interaction_rating"].opt_number() if "interaction_rating" in f else None
    return _build(doc.path, PhysicalEntity, f["id"].string(), f["label"].string(), box, o, i)


def _element_from(doc: _Doc) -> UiElement:
    f = doc.obj(("id", "name", "width", "height", "interaction_frequency"))
    return _build(doc.path, UiElement, f["id"].string(), f["name"].string(), f["width"].number(),
                  f["height"].number(), f["interaction_frequency"].number())


def _entities_from(doc: _Doc, require_ratings: bool) -> list[PhysicalEntity]:
    entities = [_entity_from(d, require_ratings) for d in doc.list()]
    _build(doc.path, _check_unique, (e.id for e in entities), "entity")
    return entities


def load_scene(text: str) -> Scene:
    """Parse and validate a scene document."""
    root = _parse_json(text).obj(("user", "entities", "elements"))
    u = root["user"].obj(("eye", "forward", "up"))
    user = _build("user", UserPose, u["eye"].vec(), u["forward"].vec(), u["up"].vec())
    entities = _entities_from(root["entities"], require_ratings=True)
    elements = [_element_from(d) for d in root["elements"].list()]
    try:
        return Scene(user, tuple(entities), tuple(elements))
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc


def _v(v: Vec3) -> list[float]:
    return [v.x, v.y, v.z]


def _entity_doc(e: PhysicalEntity) -> dict:
    return {
        "id": e.id,
        "label": e.label,
        "box": {"center": _v(e.box.center), "half_extents": _v(e.box.half_extents)},
        "overlay_rating": e.overlay_rating,
        "interaction_rating": e.interaction_rating,
    }


def _dump(doc: Any) -> str:
    # float repr is the shortest exact round-trip form (>= 9 significant digits of precision)
    return json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def save_scene(scene: Scene) -> str:
    u = scene.user
    return _dump({
        "user": {"eye": _v(u.eye), "forward": _v(u.forward), "up": _v(u.up)},
        "entities": [_entity_doc(e) for e in scene.entities],
        "elements": [
            {"id": e.id, "name": e.name, "width": e.width, "height": e.height,
             "interaction_frequency": e.interaction_frequency}
            for e in scene.elements
        ],
    })


def load_entities(text: str) -> list[PhysicalEntity]:
    """Parse an entities document; ratings may be null (unrated)."""
    root = _parse_json(text).obj(("entities",))
    return _entities_from(root["entities"], require_ratings=False)


def save_entities(entities: Sequence[PhysicalEntity]) -> str:
    return _dump({"entities": [_entity_doc(e) for e in entities]})


def save_layout(layout: Layout, scene: Scene) -> str:
    """Serialize a layout in scene element order (byte-deterministic)."""
    layout.check(scene)
    return _dump({"layouts": [
        {"element_id": e.id, "position": _v(layout.positions[e.id])} for e in scene.elements
    ]})


def load_layout(text: str, scene: Scene | None = None) -> Layout:
    root = _parse_json(text).obj(("layouts",))
    positions: dict[str, Vec3] = {}
    for item in root["layouts"].list():
        f = item.obj(("element_id", "position"))
        eid = f["element_id"].string()
        if eid in positions:
            raise FormatError(f"duplicate element id {eid!r}", item.path)
        positions[eid] = f["position"].vec()
    layout = Layout(positions)
    if scene is not None:
        try:
            layout.check(scene)
        except ValidationError as exc:
            raise FormatError(str(exc)) from exc
    return layout
