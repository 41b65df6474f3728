"""Cost terms and the weighted layout objective ``Q = sum_v sum_j w_vj * c_vj(x)``.

Two terms use ray casting against the rated entity boxes:

* overlay suitability: ``sum_r sum_h p_b * exp(-5 d_h)`` where
  ``p_b = 0.5 - o_b`` for ``o_b <= 0.5`` and 0 otherwise;
* interaction suitability: ``sum_r sum_h f_v * (0.5 - i_b) * exp(-5 d_h)``.
  This one is negative (a reward) over boxes with ``i_b > 0.5``.

Five AUIT-style terms cover viewing comfort: occlusion between
elements, look-towards, distance band, field of view and constant view size.
Costs are not normalized by ray count, so keep ``grid_n`` fixed when comparing
layouts.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .errors import FormatError, GeometryError, ValidationError
from . import _kernels
from .geometry import DEFAULT_GRID, collect_hits, grid_offsets
from .scene import Layout, Scene, UiElement, UserPose, Vec3

TERMS = (
    "occlusion",
    "look_towards",
    "distance",
    "field_of_view",
    "constant_view_size",
    "overlay_suitability",
    "interaction_suitability",
)
HIT_FALLOFF = 5.0


@dataclass(frozen=True)
class ObjectiveParams:
    grid_n: int = DEFAULT_GRID
    d_min: float = 0.3
    d_max: float = 0.7
    half_angle: float = math.radians(45.0)
    reference_distance: float = 0.5
    clip_rays: bool = False

    def __post_init__(self) -> None:
        if self.grid_n < 1:
            raise ValidationError("grid_n must be >= 1")
        if not 0 < self.d_min <= self.d_max:
            raise ValidationError("need 0 < d_min <= d_max")
        if not 0 < self.half_angle <= math.pi:
            raise ValidationError("half_angle must lie in (0, pi]")
        if self.reference_distance <= 0:
            raise ValidationError("reference_distance must be > 0")


def _check_weights(weights: Mapping[str, float], where: str) -> dict[str, float]:
    out = {}
    for name, w in weights.items():
        if name not in TERMS:
            raise ValidationError(f"{where}: unknown term {name!r} (known: {', '.join(TERMS)})")
        if isinstance(w, bool) or not isinstance(w, (int, float)) or not math.isfinite(w) or w < 0:
            raise ValidationError(f"{where}: weight for {name!r} must be a finite number >= 0, got {w!r}")
        out[name] = float(w)
    return out


@dataclass(frozen=True)
class WeightConfig:
    """Global term weights with optional per-element overrides.

    Terms missing from ``weights`` weigh 0. All-zero configurations are
    allowed (flat landscape) but reported by :attr:`is_flat`.
    """

    weights: Mapping[str, float]
    overrides: Mapping[str, Mapping[str, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        w = _check_weights(self.weights, "weights")
        ov = {eid: MappingProxyType(_check_weights(m, f"overrides[{eid!r}]"))
              for eid, m in self.overrides.items()}
        object.__setattr__(self, "weights", MappingProxyType(w))
        object.__setattr__(self, "overrides", MappingProxyType(ov))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(json.dumps(self.to_dict(), sort_keys=True))

    def weight(self, term: str, element_id: str | None = None) -> float:
        if element_id is not None and term in self.overrides.get(element_id, {}):
            return self.overrides[element_id][term]
        return self.weights.get(term, 0.0)

    def vector(self, element_id: str | None = None) -> np.ndarray:
        return np.array([self.weight(t, element_id) for t in TERMS])

    def scaled(self, k: float) -> WeightConfig:
        return WeightConfig({t: w * k for t, w in self.weights.items()},
                            {e: {t: w * k for t, w in m.items()} for e, m in self.overrides.items()})

    @property
    def is_flat(self) -> bool:
        return not any(self.weights.values()) and not any(any(m.values()) for m in self.overrides.values())

    def to_dict(self) -> dict:
        doc: dict = {"weights": {t: self.weights[t] for t in TERMS if t in self.weights}}
        if self.overrides:
            doc["overrides"] = {e: {t: m[t] for t in TERMS if t in m} for e, m in sorted(self.overrides.items())}
        return doc

    @classmethod
    def from_dict(cls, doc: object) -> WeightConfig:
        if not isinstance(doc, dict):
            raise FormatError("weights document must be an object")
        unknown = set(doc) - {"weights", "overrides", "name"}
        if unknown:
            raise FormatError(f"unknown field(s) {sorted(unknown)}")
        if "weights" not in doc:
            raise FormatError("missing field 'weights'")
        try:
            return cls(doc["weights"], doc.get("overrides", {}))
        except (ValidationError, AttributeError, TypeError) as exc:
            raise FormatError(str(exc)) from exc


@dataclass(frozen=True)
class CostReport:
    """Per-element per-term costs ``c_vj``, the weights used, and ``Q``."""

    costs: Mapping[str, Mapping[str, float]]
    weights: Mapping[str, Mapping[str, float]]
    total: float

    def element_total(self, element_id: str) -> float:
        c, w = self.costs[element_id], self.weights[element_id]
        return math.fsum(w[t] * c[t] for t in TERMS)

    def term_total(self, term: str) -> float:
        return math.fsum(c[term] for c in self.costs.values())

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "elements": [
                {"element_id": eid, "costs": dict(self.costs[eid]), "weights": dict(self.weights[eid]),
                 "weighted_total": self.element_total(eid)}
                for eid in self.costs
            ],
        }


# --------------------------------------------------------------------------
# closed-form per-position terms (vectorized over positions)


def overlay_penalty(o_b: float) -> float:
    """Penalty of covering a box rated ``o_b``; boxes above 0.5 are fine."""
    if not 0.0 <= o_b <= 1.0:
        raise ValidationError(f"o_b must lie in [0, 1], got {o_b}")
    return 0.5 - o_b if o_b <= 0.5 else 0.0


def _view(user: UserPose, positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    v = positions - user.eye.array()
    d = np.linalg.norm(v, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.clip(v @ user.forward.array() / d, -1.0, 1.0)
    return d, cos


def look_towards_values(user: UserPose, positions: np.ndarray) -> np.ndarray:
    _, cos = _view(user, positions)
    return (1.0 - cos) / 2.0


def distance_values(user: UserPose, positions: np.ndarray, d_min: float, d_max: float) -> np.ndarray:
    d, _ = _view(user, positions)
    below = ((d - d_min) / d_min) ** 2
    above = ((d - d_max) / d_max) ** 2
    return np.where(d < d_min, below, np.where(d > d_max, above, 0.0))


def fov_values(user: UserPose, positions: np.ndarray, half_angle: float) -> np.ndarray:
    _, cos = _view(user, positions)
    theta = np.arccos(cos)
    return np.where(theta > half_angle, ((theta - half_angle) / half_angle) ** 2, 0.0)


def view_size_values(user: UserPose, positions: np.ndarray, reference_distance: float) -> np.ndarray:
    d, _ = _view(user, positions)
    with np.errstate(divide="ignore"):
        return (1.0 - reference_distance / d) ** 2


def _one(fn, user: UserPose, position: Vec3, *args) -> float:
    if (position - user.eye).norm() <= 1e-12:
        raise GeometryError("element is placed at the eye")
    return float(fn(user, position.array()[None, :], *args)[0])


def look_towards_cost(user: UserPose, element: UiElement, position: Vec3) -> float:
    """``(1 - cos theta) / 2`` for the angle between forward and eye->element."""
    return _one(look_towards_values, user, position)


def distance_cost(user: UserPose, element: UiElement, position: Vec3,
                  preferred_range: tuple[float, float] = (0.3, 0.7)) -> float:
    d_min, d_max = preferred_range
    return _one(distance_values, user, position, d_min, d_max)


def fov_cost(user: UserPose, element: UiElement, position: Vec3,
             half_angle: float = math.radians(45.0)) -> float:
    return _one(fov_values, user, position, half_angle)


def view_size_cost(user: UserPose, element: UiElement, position: Vec3,
                   reference_distance: float = 0.5) -> float:
    return _one(view_size_values, user, position, reference_distance)


def _hit_weights(scene: Scene, element: UiElement, position: Vec3, grid_n: int, clip: bool):
    ids = {e.id: e for e in scene.entities}
    for hits in collect_hits(scene, element, position, grid_n, clip).hits.values():
        for h in hits:
            yield ids[h.entity_id], math.exp(-HIT_FALLOFF * h.d_h)


def overlay_cost(scene: Scene, element: UiElement, position: Vec3, grid_n: int = DEFAULT_GRID,
                 clip: bool = False) -> float:
    return math.fsum(overlay_penalty(ent.overlay_rating) * w
                     for ent, w in _hit_weights(scene, element, position, grid_n, clip))


def interaction_cost(scene: Scene, element: UiElement, position: Vec3, grid_n: int = DEFAULT_GRID,
                     clip: bool = False) -> float:
    f = element.interaction_frequency
    return math.fsum(f * (0.5 - ent.interaction_rating) * w
                     for ent, w in _hit_weights(scene, element, position, grid_n, clip))


def occlusion_cost(scene: Scene, layout: Layout, element: UiElement, grid_n: int = DEFAULT_GRID) -> float:
    """Summed fraction of the element's rays that cross another element first.

    When two elements sit at exactly the same depth along a ray, the one
    listed earlier in the scene counts as the front one.
    """
    ev = LayoutEvaluator(scene, WeightConfig({}), ObjectiveParams(grid_n=grid_n))
    occ = ev.occlusion(layout.as_array(scene))
    return float(occ[[e.id for e in scene.elements].index(element.id)])


# --------------------------------------------------------------------------
# batched evaluation


class LayoutEvaluator:
    """Evaluates Q and its terms for a fixed scene, weights and parameters.

    Entity arrays and per-element weights are precomputed; positions are
    passed as (V, 3) arrays in scene element order.
    """

    def __init__(self, scene: Scene, weights: WeightConfig, params: ObjectiveParams | None = None):
        self.scene = scene
        self.weights = weights
        self.params = params or ObjectiveParams()
        known = {e.id for e in scene.elements}
        stray = sorted(set(weights.overrides) - known)
        if stray:
            raise ValidationError(f"weight overrides for unknown element(s) {stray}")
        self.user = scene.user
        self.eye = scene.user.eye.array()
        self._fwd = scene.user.forward.array()
        self._up = scene.user.up.array()
        ents = scene.entities
        centers = np.array([e.box.center.array() for e in ents]).reshape(-1, 3)
        self.halves = np.array([e.box.half_extents.array() for e in ents]).reshape(-1, 3)
        self.o_rel = self.eye - centers
        o = np.array([e.overlay_rating for e in ents], dtype=float)
        self.penalty = np.where(o <= 0.5, 0.5 - o, 0.0)
        self.interaction = 0.5 - np.array([e.interaction_rating for e in ents], dtype=float)
        self.elements = scene.elements
        self.W = np.array([weights.vector(e.id) for e in scene.elements]).reshape(-1, len(TERMS))
        self.freq = np.array([e.interaction_frequency for e in scene.elements])
        self.half_w = np.array([e.width / 2.0 for e in scene.elements])
        self.half_h = np.array([e.height / 2.0 for e in scene.elements])
        g = self.params.grid_n
        self.offsets = np.array([grid_offsets(e.width, e.height, g) for e in scene.elements]).reshape(-1, g * g, 2)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def standalone(self, k: int, positions: np.ndarray) -> np.ndarray:
        """(P, 6) costs [look, distance, fov, view size, overlay, interaction] of element k.

        These terms do not depend on the other elements. Rows for positions on
        the eye are +inf.
        """
        p = self.params
        positions = np.ascontiguousarray(positions, dtype=float).reshape(-1, 3)
        out = _kernels.element_terms(positions, self.offsets[k], self.eye, self._fwd, self._up,
                                     self.o_rel, self.halves, self.penalty, self.interaction,
                                     p.d_min, p.d_max, p.half_angle, p.reference_distance, p.clip_rays)
        # keep eye rows at +inf instead of inf * 0
        col = out[:, 5]
        col[np.isfinite(col)] *= self.freq[k]
        return out

    def occlusion(self, positions: np.ndarray) -> np.ndarray:
        """(V,) occlusion cost of each element given the whole layout."""
        positions = np.ascontiguousarray(positions, dtype=float).reshape(-1, 3)
        return _kernels.occlusion(positions, self.offsets, self.half_w, self.half_h,
                                  self.eye, self._fwd, self._up)

    def occlusion_sweep(self, k: int, candidates: np.ndarray, positions: np.ndarray) -> np.ndarray:
        """Weighted occlusion of the layout for each candidate position of element k."""
        candidates = np.ascontiguousarray(candidates, dtype=float).reshape(-1, 3)
        if self.n_elements < 2:
            return np.zeros(len(candidates))
        return _kernels.occlusion_sweep(k, candidates, np.ascontiguousarray(positions, dtype=float),
                                        self.offsets, self.half_w, self.half_h, self.eye, self._fwd,
                                        self._up, np.ascontiguousarray(self.W[:, 0]))

    def term_matrix(self, positions: np.ndarray) -> np.ndarray:
        """(V, 7) unweighted costs in ``TERMS`` order."""
        positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        out = np.zeros((self.n_elements, len(TERMS)))
        for k in range(self.n_elements):
            out[k, 1:] = self.standalone(k, positions[k:k + 1])[0]
        out[:, 0] = self.occlusion(positions)
        return out

    def total(self, positions: np.ndarray) -> float:
        c = self.term_matrix(positions)
        if not np.all(np.isfinite(c)):
            return math.inf
        return math.fsum((self.W * c).ravel())

    def report(self, layout: Layout) -> CostReport:
        X = layout.as_array(self.scene)
        c = self.term_matrix(X)
        if not np.all(np.isfinite(c)):
            raise GeometryError("an element is placed at the eye")
        costs = {e.id: {t: float(c[i, j]) for j, t in enumerate(TERMS)} for i, e in enumerate(self.elements)}
        weights = {e.id: {t: float(self.W[i, j]) for j, t in enumerate(TERMS)} for i, e in enumerate(self.elements)}
        return CostReport(costs, weights, math.fsum((self.W * c).ravel()))


def total_objective(scene: Scene, layout: Layout, weights: WeightConfig, grid_n: int = DEFAULT_GRID,
                    params: ObjectiveParams | None = None) -> CostReport:
    """Evaluate every term for every element and the weighted sum Q."""
    if params is None:
        params = ObjectiveParams(grid_n=grid_n)
    layout.check(scene)
    return LayoutEvaluator(scene, weights, params).report(layout)


def load_weights(text: str) -> WeightConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from exc
    return WeightConfig.from_dict(doc)


def dump_weights(weights: WeightConfig, name: str | None = None) -> str:
    doc = weights.to_dict()
    if name is not None:
        doc = {"name": name, **doc}
    return json.dumps(doc, indent=2) + "\n"
