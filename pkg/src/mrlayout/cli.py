"""Command-line entry point: segment -> rate -> optimize -> render, plus analyze.

Exit codes: 0 success, 1 usage, 2 input or format error, 3 provider error,
4 infeasible optimization.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evalstats, reasoning
from .errors import FormatError, GeometryError, InfeasibleError, ValidationError
from .objectives import ObjectiveParams, load_weights
from .perception import (SegmentParams, load_camera, load_cloud, load_detections, merge_detection,
                         segment_box)
from .presets import PRESETS, load_preset
from .render import render
from .scene import load_entities, load_layout, load_scene, save_entities, save_layout
from .solver import SolverConfig, dump_trace, optimize

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_PROVIDER, EXIT_INFEASIBLE = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 by default
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read file: {exc.strerror}", path) from exc


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise FormatError(f"cannot write file: {exc.strerror}", path) from exc


def _in(path: str, fn, *args):
    """Parse a file, prefixing format errors with its path."""
    try:
        return fn(_read(path), *args)
    except FormatError as exc:
        raise FormatError(str(exc), path) from exc


# --------------------------------------------------------------------------


def cmd_optimize(args) -> int:
    scene = _in(args.scene, load_scene)
    if args.entities:
        ents = _in(args.entities, load_entities)
        try:
            scene = scene.with_entities(ents)
        except ValidationError as exc:
            raise FormatError(str(exc), args.entities) from exc
    if args.weights_file:
        weights = _in(args.weights_file, load_weights)
    else:
        weights = load_preset(args.preset)
    previous = _in(args.previous, load_layout, scene) if args.previous else None
    cfg = SolverConfig(seed=args.seed, restarts=args.restarts, iterations=args.iterations,
                       previous=previous, displacement_weight=args.displacement_weight,
                       params=ObjectiveParams(grid_n=args.grid))
    layout, report, trace = optimize(scene, weights, cfg)
    _write(args.out, save_layout(layout, scene))
    if args.report:
        _write(args.report, json.dumps(report.to_dict(), indent=2) + "\n")
    if args.trace:
        _write(args.trace, dump_trace(trace))
    if args.svg:
        _write(args.svg, render(scene, layout, args.view))
    print(f"Q = {report.total:.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_segment(args) -> int:
    cloud = _in(args.cloud, load_cloud, args.cloud)
    cam = _in(args.camera, load_camera)
    dets = _in(args.detections, load_detections, cam)
    entities = list(_in(args.into, load_entities)) if args.into else []
    params = SegmentParams(near=args.near, far=args.far, gamma=args.gamma, eps=args.eps,
                           min_pts=args.min_pts)
    for i, det in enumerate(dets):
        cand = segment_box(cloud, cam, det, params)
        if cand is None:
            print(f"detection {i} ({det.label}): no object", file=sys.stderr)
            continue
        entities = merge_detection(entities, cand, args.iou)
    _write(args.out, save_entities(entities))
    return EXIT_OK


def _provider(args):
    if args.provider == "mock":
        if not args.fixtures:
            raise UsageError("--provider mock needs --fixtures")
        return _in(args.fixtures, reasoning.MockProvider.from_json)
    return reasoning.LiveProvider.from_env(timeout=args.timeout, max_retries=args.retries)


def cmd_rate(args) -> int:
    if args.links and not (args.entities and args.entities_out):
        raise UsageError("--links needs --entities and --entities-out")
    image_in_file, areas = _in(args.areas, reasoning.load_areas)
    few_shot = _in(args.few_shot, reasoning.load_few_shot) if args.few_shot else []
    query = reasoning.RatingQuery(args.mode, args.image, tuple(areas), tuple(few_shot),
                                  args.monitor_refinement)
    run = reasoning.run_rating(query, _provider(args), args.instances, args.seed, args.max_in_flight)
    for inst in run.instances:
        for d in inst.diagnostics:
            print(f"instance seed {inst.seed}: line {d.line}: {d.problem}", file=sys.stderr)
    if not run.aggregate:
        raise FormatError("no instance produced a parseable rating")
    _write(args.out, reasoning.dump_ratings(run.aggregate, args.image, args.mode, args.instances))
    if args.entities:
        links = {a.index: a.entity_id for a in areas if a.entity_id}
        if args.links:
            links.update(_in(args.links, reasoning.load_links))
        ents = _in(args.entities, load_entities)
        rep = reasoning.ratings_to_entity(run.aggregate, links, ents, args.mode)
        for a in rep.unlinked_areas:
            print(f"area {a}: no linked entity", file=sys.stderr)
        for e in rep.unknown_entities:
            print(f"linked entity {e!r} not found", file=sys.stderr)
        if args.entities_out:
            _write(args.entities_out, save_entities(rep.entities))
    if image_in_file and image_in_file != args.image:
        print(f"note: areas file names image {image_in_file!r}", file=sys.stderr)
    return EXIT_OK


def cmd_analyze(args) -> int:
    matrices = _in(args.ratings, evalstats.load_ratings_csv)
    report = evalstats.analyze(matrices, args.iterations, args.seed, args.alpha)
    _write(args.out, evalstats.dump_report(report))
    return EXIT_OK


def cmd_render(args) -> int:
    scene = _in(args.scene, load_scene)
    if args.entities:
        scene = scene.with_entities(_in(args.entities, load_entities))
    layout = _in(args.layout, load_layout, scene)
    _write(args.out, render(scene, layout, args.view))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mrlayout", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    o = sub.add_parser("optimize", help="optimize element positions for a scene")
    o.add_argument("scene")
    w = o.add_mutually_exclusive_group()
    w.add_argument("--preset", choices=sorted(PRESETS), default="situation-adapt")
    w.add_argument("--weights-file")
    o.add_argument("--entities", help="entities file replacing the scene's entities")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--grid", type=int, default=5, help="rays per element side")
    o.add_argument("--restarts", type=int, default=8)
    o.add_argument("--iterations", type=int, default=2000)
    o.add_argument("--previous", help="previous layout to warm start from")
    o.add_argument("--displacement-weight", type=float, default=0.0)
    o.add_argument("--out")
    o.add_argument("--report")
    o.add_argument("--trace")
    o.add_argument("--svg")
    o.add_argument("--view", choices=("top", "camera"), default="top")
    o.set_defaults(func=cmd_optimize)

    s = sub.add_parser("segment", help="turn detections into 3D entity boxes")
    s.add_argument("cloud")
    s.add_argument("camera")
    s.add_argument("detections")
    s.add_argument("--into", help="existing entities file to merge into")
    s.add_argument("--out")
    s.add_argument("--iou", type=float, default=0.5)
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--min-pts", type=int, default=10)
    s.add_argument("--gamma", type=float, default=100.0)
    s.add_argument("--near", type=float, default=0.2)
    s.add_argument("--far", type=float, default=10.0)
    s.set_defaults(func=cmd_segment)

    r = sub.add_parser("rate", help="rate annotated areas with a model provider")
    r.add_argument("image")
    r.add_argument("areas")
    r.add_argument("--mode", choices=("overlay", "interaction"), default="overlay")
    r.add_argument("--instances", type=int, default=42)
    r.add_argument("--seed", type=int, default=0, help="seed of the first instance")
    r.add_argument("--provider", choices=("mock", "live"), default="mock")
    r.add_argument("--fixtures")
    r.add_argument("--few-shot")
    r.add_argument("--monitor-refinement", action="store_true")
    r.add_argument("--links")
    r.add_argument("--entities")
    r.add_argument("--entities-out")
    r.add_argument("--max-in-flight", type=int, default=4)
    r.add_argument("--timeout", type=float, default=60.0)
    r.add_argument("--retries", type=int, default=3)
    r.add_argument("--out")
    r.set_defaults(func=cmd_rate)

    a = sub.add_parser("analyze", help="compare model and participant ratings")
    a.add_argument("ratings")
    a.add_argument("--iterations", type=int, default=2000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--alpha", type=float, default=evalstats.ALPHA)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("render", help="draw a scene and layout as SVG")
    v.add_argument("scene")
    v.add_argument("layout")
    v.add_argument("--entities")
    v.add_argument("--view", choices=("top", "camera"), default="top")
    v.add_argument("--out")
    v.set_defaults(func=cmd_render)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mrlayout: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except reasoning.ProviderError as exc:
        print(f"mrlayout: provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except InfeasibleError as exc:
        print(f"mrlayout: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (FormatError, ValidationError, GeometryError, reasoning.ParseFailure) as exc:
        print(f"mrlayout: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
