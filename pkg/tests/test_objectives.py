import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrlayout.errors import FormatError, ValidationError
from mrlayout.objectives import (TERMS, LayoutEvaluator, ObjectiveParams, WeightConfig, distance_cost,
                                 fov_cost, interaction_cost, load_weights, look_towards_cost,
                                 occlusion_cost, overlay_cost, overlay_penalty, total_objective,
                                 view_size_cost)
from mrlayout.presets import load_preset
from mrlayout.scene import Layout, Vec3

from _occlusion_ref import occlusion_ref
from conftest import element, entity, pose, scene

# unit cube at the origin, viewed from -x: the center ray enters at the face center
FACE_DH = 0.5 / (0.5 * math.sqrt(3.0))
USER_X = pose(eye=(-5, 0, 0), forward=(1, 0, 0))


def cube_scene(o=0.5, i=0.5, f=1.0):
    return scene([entity("cube", (0, 0, 0), (0.5, 0.5, 0.5), o, i)], [element("e", 0.2, 0.2, f)], USER_X)


@pytest.mark.parametrize("o, expected", [(0.5, 0.0), (1.0, 0.0), (0.2, 0.3), (0.0, 0.5), (0.75, 0.0)])
def test_overlay_penalty(o, expected):
    assert overlay_penalty(o) == pytest.approx(expected, abs=1e-15)


def test_overlay_penalty_rejects_out_of_range():
    with pytest.raises(ValidationError):
        overlay_penalty(1.2)


def test_overlay_cost_no_entities():
    s = scene(elements=[element()])
    assert overlay_cost(s, s.elements[0], Vec3(0, 0, -1)) == 0.0


def test_overlay_cost_face_center():
    s = cube_scene(o=0.2)
    c = overlay_cost(s, s.elements[0], Vec3(-2, 0, 0), grid_n=1)
    assert c == pytest.approx(0.3 * math.exp(-5 * FACE_DH), abs=1e-12)
    # the quoted figure is truncated to five decimals
    assert c == pytest.approx(0.01672, abs=1e-5)


def test_overlay_cost_suitable_box_is_free():
    s = cube_scene(o=0.9)
    assert overlay_cost(s, s.elements[0], Vec3(-2, 0, 0), grid_n=1) == 0.0


def test_interaction_cost_face_center():
    s = cube_scene(i=1.0, f=1.0)
    c = interaction_cost(s, s.elements[0], Vec3(-2, 0, 0), grid_n=1)
    assert c == pytest.approx(-0.5 * math.exp(-5 * FACE_DH), abs=1e-12)
    assert c == pytest.approx(-0.02787, abs=1e-5)


def test_interaction_cost_neutral_and_zero_frequency():
    s = cube_scene(i=0.5)
    assert interaction_cost(s, s.elements[0], Vec3(-2, 0, 0)) == 0.0
    s = cube_scene(i=1.0, f=0.0)
    assert interaction_cost(s, s.elements[0], Vec3(-2, 0, 0)) == 0.0


def test_single_element_no_occlusion():
    s = scene(elements=[element()])
    assert occlusion_cost(s, Layout({"e": Vec3(0, 0, -1)}), s.elements[0]) == 0.0


def test_coincident_elements_full_occlusion():
    s = scene(elements=[element("a"), element("b")])
    lay = Layout({"a": Vec3(0, 0, -1), "b": Vec3(0, 0, -1)})
    # same depth: the element listed first counts as the front one
    assert occlusion_cost(s, lay, s.elements[0]) == 0.0
    assert occlusion_cost(s, lay, s.elements[1]) == 1.0


def test_stacked_elements_far_one_occluded():
    s = scene(elements=[element("a"), element("b")])
    lay = Layout({"a": Vec3(0, 0, -2), "b": Vec3(0, 0, -1)})
    assert occlusion_cost(s, lay, s.elements[0]) == 1.0
    assert occlusion_cost(s, lay, s.elements[1]) == 0.0


def test_side_by_side_no_occlusion():
    s = scene(elements=[element("a"), element("b")])
    lay = Layout({"a": Vec3(-0.3, 0, -1), "b": Vec3(0.3, 0, -1)})
    assert occlusion_cost(s, lay, s.elements[0]) == 0.0
    assert occlusion_cost(s, lay, s.elements[1]) == 0.0


def test_look_towards():
    u, e = pose(), element()
    assert look_towards_cost(u, e, Vec3(0, 0, -1)) == pytest.approx(0.0)
    assert look_towards_cost(u, e, Vec3(0, 0, 1)) == pytest.approx(1.0)
    assert look_towards_cost(u, e, Vec3(1, 0, 0)) == pytest.approx(0.5)


def test_distance():
    u, e = pose(), element()
    assert distance_cost(u, e, Vec3(0, 0, -0.3)) == 0.0
    assert distance_cost(u, e, Vec3(0, 0, -0.5)) == 0.0
    assert distance_cost(u, e, Vec3(0, 0, -1.4)) == pytest.approx(1.0)
    assert distance_cost(u, e, Vec3(0, 0, -0.15)) == pytest.approx(0.25)


def test_fov():
    u, e = pose(), element()
    q = math.radians(45)
    assert fov_cost(u, e, Vec3(0, 0, -1)) == 0.0
    assert fov_cost(u, e, Vec3(math.sin(q), 0, -math.cos(q))) == pytest.approx(0.0, abs=1e-12)
    assert fov_cost(u, e, Vec3(1, 0, 0)) == pytest.approx(1.0)


def test_view_size():
    u, e = pose(), element()
    assert view_size_cost(u, e, Vec3(0, 0, -0.5)) == pytest.approx(0.0)
    assert view_size_cost(u, e, Vec3(0, 0, -1.0)) == pytest.approx(0.25)
    assert view_size_cost(u, e, Vec3(0, 0, -1e9)) == pytest.approx(1.0)


def test_weights_validation():
    with pytest.raises(ValidationError, match="unknown term"):
        WeightConfig({"gravity": 1.0})
    with pytest.raises(ValidationError):
        WeightConfig({"distance": -1.0})
    assert WeightConfig({}).is_flat


def test_weights_file_errors():
    with pytest.raises(FormatError):
        load_weights('{"weights": {"distance": "x"}}')
    with pytest.raises(FormatError, match="line 1"):
        load_weights("{")


def test_per_element_override():
    w = WeightConfig({"distance": 1.0}, {"e": {"distance": 3.0}})
    assert w.weight("distance", "e") == 3.0 and w.weight("distance", "other") == 1.0


def _lecture_layout(lecture):
    pts = np.array([[0.0, 0.8, -0.3], [0.3, 0.9, -0.4], [-0.3, 1.3, -0.5], [0.2, 1.4, -0.6]])
    return Layout.from_array(lecture, pts)


def test_single_weight_isolates_term(lecture):
    lay = _lecture_layout(lecture)
    full = total_objective(lecture, lay, WeightConfig({t: 1.0 for t in TERMS}))
    for t in TERMS:
        r = total_objective(lecture, lay, WeightConfig({t: 1.0}))
        assert r.total == pytest.approx(full.term_total(t), abs=1e-12)


def test_doubling_weights_doubles_q(lecture):
    lay = _lecture_layout(lecture)
    w = load_preset("situation-adapt")
    a = total_objective(lecture, lay, w).total
    b = total_objective(lecture, lay, w.scaled(2.0)).total
    assert b == pytest.approx(2 * a, rel=1e-12)


def test_satisfied_layout_has_zero_q():
    # no entities, one element straight ahead at the reference distance
    s = scene(elements=[element("a")])
    r = total_objective(s, Layout({"a": Vec3(0, 0, -0.5)}), load_preset("situation-adapt"))
    assert all(r.costs["a"][t] == pytest.approx(0.0, abs=1e-15) for t in TERMS)
    assert r.total == pytest.approx(0.0, abs=1e-15)


def test_report_decomposes(lecture):
    r = total_objective(lecture, _lecture_layout(lecture), load_preset("situation-adapt"))
    assert r.total == pytest.approx(math.fsum(r.element_total(e.id) for e in lecture.elements), abs=1e-9)
    assert r.total == pytest.approx(math.fsum(r.weights[e][t] * r.costs[e][t]
                                              for e in r.costs for t in TERMS), abs=1e-9)


def test_report_matches_reference_functions(lecture):
    lay = _lecture_layout(lecture)
    r = total_objective(lecture, lay, load_preset("situation-adapt"))
    u = lecture.user
    for e in lecture.elements:
        p = lay[e.id]
        c = r.costs[e.id]
        assert c["overlay_suitability"] == pytest.approx(overlay_cost(lecture, e, p), abs=1e-9)
        assert c["interaction_suitability"] == pytest.approx(interaction_cost(lecture, e, p), abs=1e-9)
        assert c["look_towards"] == pytest.approx(look_towards_cost(u, e, p), abs=1e-12)
        assert c["distance"] == pytest.approx(distance_cost(u, e, p), abs=1e-12)
        assert c["field_of_view"] == pytest.approx(fov_cost(u, e, p), abs=1e-12)
        assert c["constant_view_size"] == pytest.approx(view_size_cost(u, e, p), abs=1e-12)


def test_clipped_rays_ignore_boxes_behind():
    s = cube_scene(o=0.0)
    e = s.elements[0]
    assert overlay_cost(s, e, Vec3(-2, 0, 0), grid_n=1, clip=True) == 0.0
    ev = LayoutEvaluator(s, WeightConfig({"overlay_suitability": 1.0}), ObjectiveParams(grid_n=1, clip_rays=True))
    assert ev.total(np.array([[-2.0, 0, 0]])) == 0.0


# --- properties


rating = st.floats(0, 1)


@st.composite
def rated_scene(draw):
    n = draw(st.integers(1, 3))
    ents = [entity(f"b{i}", (draw(st.floats(-0.5, 0.5)), draw(st.floats(-0.5, 0.5)), draw(st.floats(-3, -1.5))),
                   (draw(st.floats(0.1, 0.8)), draw(st.floats(0.1, 0.8)), draw(st.floats(0.05, 0.5))),
                   draw(rating), draw(rating))
            for i in range(n)]
    el = element("e", draw(st.floats(0.1, 0.5)), draw(st.floats(0.1, 0.5)), draw(rating))
    pos = Vec3(draw(st.floats(-0.3, 0.3)), draw(st.floats(-0.3, 0.3)), draw(st.floats(-1.0, -0.4)))
    return scene(ents, [el]), pos


@settings(max_examples=60, deadline=None)
@given(rated_scene())
def test_overlay_nonnegative_and_zero_iff_suitable(data):
    s, pos = data
    c = overlay_cost(s, s.elements[0], pos)
    assert c >= 0.0
    if all(e.overlay_rating >= 0.5 for e in s.entities):
        assert c == 0.0


@settings(max_examples=40, deadline=None)
@given(rated_scene(), st.integers(0, 2), st.floats(0, 1))
def test_overlay_monotone_in_rating(data, k, new):
    s, pos = data
    k = k % len(s.entities)
    ents = list(s.entities)
    old = ents[k].overlay_rating
    lo, hi = sorted((old, new))
    cost = []
    for o in (lo, hi):
        ents[k] = entity(ents[k].id, ents[k].box.center.array(), ents[k].box.half_extents.array(),
                         o, ents[k].interaction_rating)
        s2 = s.with_entities(ents)
        cost.append(overlay_cost(s2, s2.elements[0], pos))
    assert cost[1] <= cost[0] + 1e-12


@settings(max_examples=40, deadline=None)
@given(rated_scene(), st.integers(0, 2), st.floats(0, 1))
def test_interaction_monotone_in_rating(data, k, new):
    s, pos = data
    k = k % len(s.entities)
    ents = list(s.entities)
    lo, hi = sorted((ents[k].interaction_rating, new))
    cost = []
    for i in (lo, hi):
        ents[k] = entity(ents[k].id, ents[k].box.center.array(), ents[k].box.half_extents.array(),
                         ents[k].overlay_rating, i)
        s2 = s.with_entities(ents)
        cost.append(interaction_cost(s2, s2.elements[0], pos))
    assert cost[1] <= cost[0] + 1e-12


@settings(max_examples=40, deadline=None)
@given(rated_scene(), st.floats(0, 1))
def test_interaction_linear_in_frequency(data, f):
    s, pos = data
    e = s.elements[0]
    base = scene(s.entities, [element("e", e.width, e.height, 1.0)])
    scaled = scene(s.entities, [element("e", e.width, e.height, f)])
    assert interaction_cost(scaled, scaled.elements[0], pos) == pytest.approx(
        f * interaction_cost(base, base.elements[0], pos), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(rated_scene(), st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5)))
def test_terms_translation_invariant(data, shift):
    s, pos = data
    shift = np.array(shift)
    moved = scene([entity(e.id, e.box.center.array() + shift, e.box.half_extents.array(),
                          e.overlay_rating, e.interaction_rating) for e in s.entities],
                  s.elements, pose(eye=shift))
    w = WeightConfig({t: 1.0 for t in TERMS})
    a = total_objective(s, Layout({"e": pos}), w)
    b = total_objective(moved, Layout({"e": Vec3.of(pos.array() + shift)}), w)
    for t in TERMS:
        assert a.costs["e"][t] == pytest.approx(b.costs["e"][t], abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 2), min_size=len(TERMS), max_size=len(TERMS)),
       st.lists(st.floats(0, 2), min_size=len(TERMS), max_size=len(TERMS)),
       st.floats(0, 3))
def test_q_linear_in_weights(w1, w2, k):
    from conftest import lecture_text
    from mrlayout.scene import load_scene
    s = load_scene(lecture_text())
    lay = _lecture_layout(s)
    q = lambda w: total_objective(s, lay, WeightConfig(dict(zip(TERMS, w)))).total
    combo = [a + k * b for a, b in zip(w1, w2)]
    assert q(combo) == pytest.approx(q(w1) + k * q(w2), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10 ** 6))
def test_occlusion_matches_reference(V, seed):
    rng = np.random.default_rng(seed)
    els = [element(f"e{i}", *rng.uniform(0.1, 0.4, 2), 0.0) for i in range(V)]
    s = scene(elements=els, user=pose(eye=(0, 1, 0)))
    X = np.array([0, 1, -0.8]) + rng.uniform(-0.3, 0.3, (V, 3))
    if rng.random() < 0.3:
        X[1] = X[0]
    ev = LayoutEvaluator(s, WeightConfig({"occlusion": 1.0}), ObjectiveParams(grid_n=4))
    ref = occlusion_ref(X, ev.offsets, ev.half_w, ev.half_h, ev.eye, ev._fwd, ev._up)
    assert np.allclose(ev.occlusion(X), ref, atol=1e-12)
