"""Fold per-instance ratings into per-area statistics and entity ratings."""
from __future__ import annotations

import json
import math
import statistics
from collections import Counter
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from ..errors import FormatError, ValidationError
from ..scene import PhysicalEntity, _parse_json, normalize_rating
from .parsing import CATEGORY_ORDER, Category, RatingResponse
from .prompts import Mode


@dataclass(frozen=True)
class AreaAggregate:
    area: int
    median: float
    sd: float
    category_mode: Category
    n: int


def modal_category(categories: Sequence[Category]) -> Category:
    counts = Counter(categories)
    return max(CATEGORY_ORDER, key=lambda c: (counts[c], -CATEGORY_ORDER.index(c)))


def aggregate_ratings(responses: Sequence[Sequence[RatingResponse]],
                      n_instances: int | None = None) -> dict[int, AreaAggregate]:
    """Median, population SD and modal category per area across instances.

    ``responses[k]`` holds instance k's ratings. Areas an instance did not rate
    are aggregated over the remaining instances.
    """
    if n_instances is not None and len(responses) != n_instances:
        raise ValidationError(f"expected {n_instances} instances, got {len(responses)}")
    scores: dict[int, list[int]] = {}
    cats: dict[int, list[Category]] = {}
    for inst in responses:
        for r in inst:
            scores.setdefault(r.area, []).append(r.score)
            cats.setdefault(r.area, []).append(r.category)
    return {a: AreaAggregate(a, float(statistics.median(s)), float(statistics.pstdev(s)),
                             modal_category(cats[a]), len(s))
            for a, s in sorted(scores.items())}


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class LinkReport:
    entities: tuple[PhysicalEntity, ...]
    unlinked_areas: tuple[int, ...]
    unknown_entities: tuple[str, ...]


def ratings_to_entity(aggregate: Mapping[int, AreaAggregate], links: Mapping[int, str],
                      entities: Sequence[PhysicalEntity], mode: Mode | str) -> LinkReport:
    """Set each linked entity's overlay or interaction rating from its area median.

    The median is rounded half up to a 1-5 score and normalized. Areas without
    a link and links naming missing entities are reported, not applied.
    """
    field_name = "overlay_rating" if Mode(mode) is Mode.OVERLAY else "interaction_rating"
    by_id = {e.id: e for e in entities}
    unlinked, unknown = [], []
    updates: dict[str, float] = {}
    for area, agg in sorted(aggregate.items()):
        eid = links.get(area)
        if eid is None:
            unlinked.append(area)
        elif eid not in by_id:
            unknown.append(eid)
        else:
            updates[eid] = normalize_rating(round_half_up(agg.median))
    out = tuple(replace(e, **{field_name: updates[e.id]}) if e.id in updates else e for e in entities)
    return LinkReport(out, tuple(unlinked), tuple(unknown))


def dump_ratings(aggregate: Mapping[int, AreaAggregate], image: str, mode: Mode | str,
                 instances: int) -> str:
    doc = {
        "image": image,
        "mode": Mode(mode).value,
        "instances": instances,
        "areas": [{"area": a.area, "median": a.median, "sd": a.sd,
                   "category_mode": a.category_mode.value, "n": a.n}
                  for a in sorted(aggregate.values(), key=lambda a: a.area)],
    }
    return json.dumps(doc, indent=2) + "\n"


def load_ratings(text: str) -> tuple[str, Mode, dict[int, AreaAggregate]]:
    f = _parse_json(text).obj(("image", "mode", "instances", "areas"))
    try:
        mode = Mode(f["mode"].string())
    except ValueError as exc:
        raise FormatError(str(exc), "mode") from exc
    out = {}
    for d in f["areas"].list():
        a = d.obj(("area", "median", "sd", "category_mode", "n"))
        try:
            cat = Category(a["category_mode"].string())
        except ValueError as exc:
            raise FormatError(str(exc), a["category_mode"].path) from exc
        idx = int(a["area"].number())
        out[idx] = AreaAggregate(idx, a["median"].number(), a["sd"].number(), cat, int(a["n"].number()))
    return f["image"].string(), mode, out
