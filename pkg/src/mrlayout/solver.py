"""Layout search: multi-restart simulated annealing and a lattice oracle.

The annealer perturbs one element per step with Gaussian noise clipped to the
search bounds. Every random number of a restart is drawn up front from
``numpy.random.default_rng([seed, restart])``, so restarts are independent and
results are bit-identical for identical inputs regardless of scheduling.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import CapExceededError, InfeasibleError, ValidationError
from .objectives import CostReport, LayoutEvaluator, ObjectiveParams, WeightConfig
from .scene import Box3, Layout, Scene, Vec3

DEFAULT_CAP = 1_000_000
PROBES = 64
# extra start candidates drawn for restart elements that begin hidden
START_TRIES = 64
POLISH_MIN_STEP = 1e-4
POLISH_MAX_EVALS = 5000
_CHUNK = 8192


def default_bounds(scene: Scene) -> Box3:
    """A 2 m cube whose near face is centered on the eye, extending forward."""
    center = scene.user.eye.array() + scene.user.forward.array()
    return Box3(Vec3.of(center), Vec3(1.0, 1.0, 1.0))


def initial_layout(scene: Scene, bounds: Box3 | None = None) -> Layout:
    """Elements in a row 0.5 m ahead of the eye, 0.3 m apart, clipped into bounds."""
    bounds = bounds or default_bounds(scene)
    user = scene.user
    right = np.cross(user.forward.array(), user.up.array())
    base = user.eye.array() + 0.5 * user.forward.array()
    n = len(scene.elements)
    pts = [np.clip(base + (i - (n - 1) / 2.0) * 0.3 * right, bounds.lo, bounds.hi) for i in range(n)]
    return Layout({e.id: Vec3.of(p) for e, p in zip(scene.elements, pts)})


@dataclass(frozen=True)
class SolverConfig:
    seed: int = 0
    restarts: int = 8
    iterations: int = 2000
    t0: float = 1.0
    cooling: float = 0.995
    sigma: float = 0.15
    bounds: Box3 | None = None
    displacement_weight: float = 0.0
    previous: Layout | None = None
    workers: int = 1
    polish: bool = True
    # reject positions hidden behind a physical box as seen from the eye
    visible_only: bool = True
    params: ObjectiveParams = field(default_factory=ObjectiveParams)

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise ValidationError(f"restarts must be >= 1, got {self.restarts}")
        if self.iterations < 1:
            raise ValidationError(f"iterations must be >= 1, got {self.iterations}")
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be > 0, got {self.sigma}")
        if not self.t0 > 0:
            raise ValidationError(f"initial temperature must be > 0, got {self.t0}")
        if not 0 < self.cooling <= 1:
            raise ValidationError(f"cooling rate must lie in (0, 1], got {self.cooling}")
        if self.displacement_weight < 0:
            raise ValidationError("displacement weight must be >= 0")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")


@dataclass(frozen=True)
class TracePoint:
    restart: int
    iteration: int
    q: float


class RestartResult(NamedTuple):
    restart: int
    positions: np.ndarray
    objective: float
    trace: np.ndarray


def _schedule(cfg: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    temps = cfg.t0 * cfg.cooling ** np.arange(cfg.iterations)
    steps = cfg.sigma * np.maximum(np.sqrt(temps / cfg.t0), 0.01)
    return temps, steps


def _kernel_args(ev: LayoutEvaluator, visible_only: bool) -> tuple:
    p = ev.params
    return (ev.offsets, ev.half_w, ev.half_h, ev.eye, ev._fwd, ev._up, ev.o_rel, ev.halves,
            ev.penalty, ev.interaction, ev.freq, np.ascontiguousarray(ev.W),
            p.d_min, p.d_max, p.half_angle, p.reference_distance, p.clip_rays, visible_only)


def _run_restart(ev: LayoutEvaluator, cfg: SolverConfig, r: int, start: np.ndarray,
                 lo: np.ndarray, hi: np.ndarray, prev: np.ndarray) -> RestartResult:
    rng = np.random.default_rng([cfg.seed, r])
    V = ev.n_elements
    X0 = start if r == 0 else rng.uniform(lo, hi, size=(V, 3))
    picks = rng.integers(0, V, size=cfg.iterations)
    noise = rng.standard_normal((cfg.iterations, 3))
    coins = rng.random(cfg.iterations)
    probe_picks = rng.integers(0, V, size=PROBES)
    probes = rng.standard_normal((PROBES, 3))
    if r > 0 and cfg.visible_only:
        X0 = _visible_start(ev, X0, rng.uniform(lo, hi, size=(V, START_TRIES, 3)))
    temps, steps = _schedule(cfg)
    args = _kernel_args(ev, cfg.visible_only)
    lam = float(cfg.displacement_weight)
    X, best, trace = _kernels.anneal(
        np.ascontiguousarray(X0, dtype=float), picks, noise, coins, temps, steps, probe_picks, probes, lo, hi,
        *args, lam, prev)
    if cfg.polish and math.isfinite(best):
        X, best = _kernels.polish(X, cfg.sigma / 4.0, POLISH_MIN_STEP, POLISH_MAX_EVALS, lo, hi,
                                  *args, lam, prev)
        trace = np.append(trace, best)
    elif cfg.polish:
        trace = np.append(trace, best)
    return RestartResult(r, X, float(best), trace)


def _visible_start(ev: LayoutEvaluator, X0: np.ndarray, spare: np.ndarray) -> np.ndarray:
    """Swap hidden start positions for the first visible spare candidate.

    One-element moves cannot leave a start where two elements are hidden,
    since Q stays infinite until both are visible.
    """
    X = X0.copy()
    hidden = hidden_mask(ev, X)
    for k in np.flatnonzero(hidden):
        ok = np.flatnonzero(~hidden_mask(ev, spare[k]))
        if len(ok):
            X[k] = spare[k, ok[0]]
    return X


def optimize(scene: Scene, weights: WeightConfig, config: SolverConfig | None = None,
             initial: Layout | None = None) -> tuple[Layout, CostReport, list[TracePoint]]:
    """Minimize Q over element positions.

    Restart 0 starts from ``initial`` (or ``config.previous`` when warm
    starting, else :func:`initial_layout`), clipped into the bounds; the other
    restarts start uniformly at random inside them. The best restart wins, ties
    going to the lowest restart index. Each restart ends with a compass-search
    polish of its best point unless ``config.polish`` is off. The trace lists
    the best-so-far search objective after every iteration of every restart,
    with the polished value as the final entry.
    """
    cfg = config or SolverConfig()
    bounds = cfg.bounds or default_bounds(scene)
    lo, hi = bounds.lo, bounds.hi
    ev = LayoutEvaluator(scene, weights, cfg.params)
    if initial is None:
        initial = cfg.previous if cfg.previous is not None else initial_layout(scene, bounds)
    start = np.clip(initial.as_array(scene), lo, hi)
    prev = cfg.previous.as_array(scene) if cfg.previous is not None else start.copy()

    def job(r: int) -> RestartResult:
        return _run_restart(ev, cfg, r, start, lo, hi, prev)

    if cfg.workers > 1 and cfg.restarts > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(job, range(cfg.restarts)))
    else:
        results = [job(r) for r in range(cfg.restarts)]

    finite = [res for res in results if math.isfinite(res.objective)]
    if not finite:
        raise InfeasibleError("no restart reached a finite objective inside the search bounds"
                              + (" with every element visible" if cfg.visible_only else ""))
    winner = min(finite, key=lambda res: (res.objective, res.restart))
    layout = Layout.from_array(scene, winner.positions)
    report = ev.report(layout)
    trace = [TracePoint(res.restart, i, float(q)) for res in results for i, q in enumerate(res.trace)]
    return layout, report, trace


def dump_trace(trace: list[TracePoint]) -> str:
    """Line-delimited JSON records ``{"restart", "iteration", "q"}``."""
    lines = [json.dumps({"restart": p.restart, "iteration": p.iteration,
                         "q": p.q if math.isfinite(p.q) else None}) for p in trace]
    return "".join(line + "\n" for line in lines)


# --------------------------------------------------------------------------
# lattice oracle


class OracleResult(NamedTuple):
    layout: Layout
    q: float
    exhaustive: bool


def lattice_axes(bounds: Box3, spacing: float) -> list[np.ndarray]:
    if not spacing > 0:
        raise ValidationError(f"grid spacing must be > 0, got {spacing}")
    return [np.minimum(np.arange(a, b + spacing / 2.0, spacing), b) for a, b in zip(bounds.lo, bounds.hi)]


def lattice_points(bounds: Box3, spacing: float) -> np.ndarray:
    """(L, 3) lattice points in x-major order."""
    ax = lattice_axes(bounds, spacing)
    g = np.meshgrid(*ax, indexing="ij")
    return np.column_stack([c.ravel() for c in g])


def hidden_mask(ev: LayoutEvaluator, pts: np.ndarray) -> np.ndarray:
    """True where the eye-to-point segment passes through an entity box."""
    pts = np.ascontiguousarray(pts, dtype=float).reshape(-1, 3)
    return _kernels.hidden_mask(pts, ev.eye, ev.o_rel, ev.halves)


def _standalone_totals(ev: LayoutEvaluator, k: int, pts: np.ndarray, visible_only: bool) -> np.ndarray:
    w = ev.W[k, 1:]
    out = np.empty(len(pts))
    for s in range(0, len(pts), _CHUNK):
        terms = ev.standalone(k, pts[s:s + _CHUNK])
        bad = ~np.all(np.isfinite(terms), axis=1)
        if visible_only:
            bad |= hidden_mask(ev, pts[s:s + _CHUNK])
        out[s:s + _CHUNK] = np.where(bad, np.inf, np.where(bad[:, None], 0.0, terms) @ w)
    return out


def _feasible_total(ev: LayoutEvaluator, X: np.ndarray, visible_only: bool) -> float:
    if visible_only and hidden_mask(ev, X).any():
        return math.inf
    return ev.total(X)


def brute_force(scene: Scene, weights: WeightConfig, grid_spacing: float, bounds: Box3 | None = None,
                cap: int = DEFAULT_CAP, params: ObjectiveParams | None = None,
                initial: Layout | None = None, visible_only: bool = True) -> OracleResult:
    """Minimum of Q over a position lattice.

    With one element every lattice point is evaluated and the first minimizer
    in lattice order wins. With more elements, each element in turn is moved
    to its best lattice point given the others until a full pass changes
    nothing; ``exhaustive`` is False in that case. The candidate count is the
    lattice size times the number of elements and must not exceed ``cap``.
    With ``visible_only`` the same feasibility rule as :func:`optimize` applies.
    """
    bounds = bounds or default_bounds(scene)
    sizes = [len(a) for a in lattice_axes(bounds, grid_spacing)]
    V = len(scene.elements)
    count = math.prod(sizes) * max(V, 1)
    if count > cap:
        raise CapExceededError(f"{count} lattice candidates exceed the cap of {cap}")
    ev = LayoutEvaluator(scene, weights, params or ObjectiveParams())
    pts = lattice_points(bounds, grid_spacing)
    if V == 0:
        return OracleResult(Layout({}), 0.0, True)
    if V == 1:
        q = _standalone_totals(ev, 0, pts, visible_only)
        i = int(np.argmin(q))
        if not math.isfinite(q[i]):
            raise InfeasibleError("no feasible lattice point")
        layout = Layout.from_array(scene, pts[i:i + 1])
        return OracleResult(layout, ev.total(pts[i:i + 1]), True)

    init = initial or initial_layout(scene, bounds)
    X = np.clip(init.as_array(scene), bounds.lo, bounds.hi)
    own = [_standalone_totals(ev, k, pts, visible_only) for k in range(V)]
    current = _feasible_total(ev, X, visible_only)
    changed = True
    while changed:
        changed = False
        for k in range(V):
            others = sum(float(_standalone_totals(ev, j, X[j:j + 1], visible_only)[0]) for j in range(V) if j != k)
            q = own[k] + others + ev.occlusion_sweep(k, pts, X)
            i = int(np.argmin(q))
            if q[i] < current and not np.array_equal(pts[i], X[k]):
                X[k] = pts[i]
                current = _feasible_total(ev, X, visible_only)
                changed = True
    if not math.isfinite(current):
        raise InfeasibleError("no finite lattice layout found")
    return OracleResult(Layout.from_array(scene, X), current, False)


def layout_in_bounds(layout: Layout, scene: Scene, bounds: Box3) -> bool:
    X = layout.as_array(scene)
    return bool(np.all(X >= bounds.lo) and np.all(X <= bounds.hi))


__all__ = [
    "SolverConfig", "TracePoint", "OracleResult", "optimize", "brute_force", "default_bounds",
    "initial_layout", "dump_trace", "lattice_points", "lattice_axes", "layout_in_bounds",
]
