"""Query several model instances for one image and aggregate their ratings."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from ..scene import _parse_json
from ..errors import FormatError, ValidationError
from .aggregate import AreaAggregate, aggregate_ratings
from .parsing import Diagnostic, ParseFailure, RatingResponse, parse_response
from .prompts import AreaAnnotation, AreaStat, FewShotExample, RatingQuery, build_prompt
from .providers import Provider


@dataclass(frozen=True)
class InstanceResult:
    seed: int
    responses: tuple[RatingResponse, ...]
    diagnostics: tuple[Diagnostic, ...]
    failed: bool


@dataclass(frozen=True)
class RatingRun:
    query: RatingQuery
    instances: tuple[InstanceResult, ...]
    aggregate: dict[int, AreaAggregate]

    @property
    def failures(self) -> int:
        return sum(r.failed for r in self.instances)


def _one(provider: Provider, query: RatingQuery, prompt: str, seed: int) -> InstanceResult:
    text = provider.query(prompt, query.image, mode=query.mode, seed=seed)
    try:
        parsed = parse_response(text)
    except ParseFailure as exc:
        return InstanceResult(seed, (), exc.diagnostics, True)
    known = {a.index for a in query.areas}
    extra = tuple(Diagnostic(0, f"Area {r.area}", f"area {r.area} is not annotated")
                  for r in parsed.responses if r.area not in known)
    kept = tuple(r for r in parsed.responses if r.area in known)
    return InstanceResult(seed, kept, parsed.diagnostics + extra, not kept)


def run_rating(query: RatingQuery, provider: Provider, instances: int, base_seed: int = 0,
               max_in_flight: int = 4) -> RatingRun:
    """Query ``instances`` model instances (seeds ``base_seed + k``) and aggregate.

    At most ``max_in_flight`` queries run at once. Results are folded in
    instance order, so concurrency never changes the outcome. Instances whose
    reply cannot be parsed are recorded and left out of the aggregate.
    """
    if instances < 1:
        raise ValidationError("need at least one instance")
    if max_in_flight < 1:
        raise ValidationError("max_in_flight must be >= 1")
    prompt = build_prompt(query)
    seeds = [base_seed + k for k in range(instances)]
    if max_in_flight == 1:
        results = [_one(provider, query, prompt, s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            results = list(pool.map(lambda s: _one(provider, query, prompt, s), seeds))
    agg = aggregate_ratings([r.responses for r in results], instances)
    return RatingRun(query, tuple(results), agg)


def load_areas(text: str) -> tuple[str | None, list[AreaAnnotation]]:
    """``{"image"?, "areas": [{"index", "box": [x0, y0, x1, y1], "entity_id"?}]}``."""
    f = _parse_json(text).obj(("areas",), ("image",))
    out = []
    for d in f["areas"].list():
        a = d.obj(("index", "box"), ("entity_id",))
        box = a["box"].list()
        if len(box) != 4:
            raise FormatError("box must be [xmin, ymin, xmax, ymax]", a["box"].path)
        idx = a["index"].number()
        if not idx.is_integer():
            raise FormatError("index must be an integer", a["index"].path)
        eid = a["entity_id"].string() if "entity_id" in a and a["entity_id"].value is not None else None
        try:
            out.append(AreaAnnotation(int(idx), tuple(b.number() for b in box), eid))
        except ValidationError as exc:
            raise FormatError(str(exc), d.path) from exc
    return (f["image"].string() if "image" in f else None), out


def load_links(text: str) -> dict[int, str]:
    """``{"<area index>": "<entity id>", ...}``."""
    doc = _parse_json(text)
    if not isinstance(doc.value, dict):
        raise FormatError("expected an object mapping area index to entity id", "$")
    out = {}
    for k, v in doc.value.items():
        if not k.isdigit() or not isinstance(v, str):
            raise FormatError(f"bad link {k!r}: {v!r}", k)
        out[int(k)] = v
    return out


def load_few_shot(text: str) -> list[FewShotExample]:
    """``[{"image", "areas": [{"index", "median", "sd"}]}]``."""
    out = []
    for d in _parse_json(text).list():
        f = d.obj(("image", "areas"))
        stats = []
        for s in f["areas"].list():
            a = s.obj(("index", "median", "sd"))
            try:
                stats.append(AreaStat(int(a["index"].number()), a["median"].number(), a["sd"].number()))
            except ValidationError as exc:
                raise FormatError(str(exc), s.path) from exc
        try:
            out.append(FewShotExample(f["image"].string(), tuple(stats)))
        except ValidationError as exc:
            raise FormatError(str(exc), d.path) from exc
    return out
