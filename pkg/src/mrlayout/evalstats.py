"""Comparing model raters with human raters.

Each rater's score in a (scenario, area) cell is tested against the remaining
human raters with a two-sided Mann-Whitney U test; the number of significant
cells is that rater's divergence count. A bootstrap over random (model, human)
pairs estimates how often a model instance diverges more than a human does.
"""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import FormatError, ValidationError

PARTICIPANT = "participant"
VLM = "vlm"
POPULATIONS = (PARTICIPANT, VLM)
EXACT_MAX_N = 12
ALPHA = 0.05


# --------------------------------------------------------------------------
# Mann-Whitney U


@dataclass(frozen=True)
class MWUResult:
    u: float  # U of the first sample
    p: float  # two-sided
    exact: bool


def midranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    xs = x[order]
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_p(doubled: np.ndarray, n_a: int, observed: int) -> float:
    """P(|D - E| >= |observed - E|) for D the doubled rank sum of a random n_a-subset."""
    N = len(doubled)
    # counts[k][s]: subsets of size k with doubled rank sum s
    total = int(doubled.sum())
    counts = np.zeros((n_a + 1, total + 1), dtype=object)
    counts[0][0] = 1
    for r in doubled.astype(int):
        for k in range(n_a, 0, -1):
            counts[k, r:] = counts[k, r:] + counts[k - 1, :total + 1 - r]
    expected = n_a * (N + 1)
    dev = abs(observed - expected)
    sums = np.arange(total + 1)
    hit = np.abs(sums - expected) >= dev
    num = sum(counts[n_a][hit])
    return min(1.0, num / math.comb(N, n_a))


def mann_whitney_u(a: Sequence[float], b: Sequence[float], exact_max_n: int = EXACT_MAX_N) -> MWUResult:
    """Two-sided Mann-Whitney U test with midranks for ties.

    Uses the exact permutation distribution of the (tied) rank sum when the
    combined size is at most ``exact_max_n``; otherwise the normal
    approximation with tie and continuity corrections.
    """
    n_a, n_b = len(a), len(b)
    if n_a == 0 or n_b == 0:
        raise ValidationError("Mann-Whitney U needs two non-empty samples")
    pooled = np.concatenate([np.asarray(a, dtype=float), np.asarray(b, dtype=float)])
    if not np.all(np.isfinite(pooled)):
        raise ValidationError("samples must be finite")
    ranks = midranks(pooled)
    r_a = float(ranks[:n_a].sum())
    u = r_a - n_a * (n_a + 1) / 2.0
    N = n_a + n_b
    if N <= exact_max_n:
        doubled = np.rint(2 * ranks).astype(int)
        return MWUResult(u, _exact_p(doubled, n_a, int(doubled[:n_a].sum())), True)
    mu = n_a * n_b / 2.0
    ties = np.array(list(Counter(pooled.tolist()).values()), dtype=float)
    var = n_a * n_b / 12.0 * ((N + 1) - float((ties ** 3 - ties).sum()) / (N * (N - 1)))
    if var <= 0:
        return MWUResult(u, 1.0, False)
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    return MWUResult(u, min(1.0, math.erfc(z / math.sqrt(2.0))), False)


# --------------------------------------------------------------------------
# rating matrices


@dataclass(frozen=True)
class RatingMatrix:
    """Raters x cells integer scores; cells are (scenario, area) pairs."""

    raters: tuple[str, ...]
    populations: tuple[str, ...]
    cells: tuple[tuple[str, str], ...]
    scores: np.ndarray  # (R, C) int
    categories: np.ndarray | None = None  # (R, C) str

    def __post_init__(self) -> None:
        s = np.asarray(self.scores)
        if s.shape != (len(self.raters), len(self.cells)):
            raise ValidationError(f"score matrix shape {s.shape} does not match "
                                  f"{len(self.raters)} raters x {len(self.cells)} cells")
        if s.size and (s.min() < 1 or s.max() > 5):
            raise ValidationError("scores must lie in 1..5")
        if len(set(self.raters)) != len(self.raters):
            raise ValidationError("rater ids must be unique")
        bad = sorted(set(self.populations) - set(POPULATIONS))
        if bad or len(self.populations) != len(self.raters):
            raise ValidationError(f"population tags must be one of {POPULATIONS}")
        if self.categories is not None and np.shape(self.categories) != s.shape:
            raise ValidationError("category matrix shape differs from the score matrix")
        object.__setattr__(self, "scores", s.astype(int))

    def members(self, population: str) -> np.ndarray:
        return np.array([i for i, p in enumerate(self.populations) if p == population], dtype=int)

    def index(self, rater: str) -> int:
        try:
            return self.raters.index(rater)
        except ValueError:
            raise ValidationError(f"unknown rater {rater!r}") from None


def divergence_profile(matrix: RatingMatrix, rater: str, alpha: float = ALPHA) -> int:
    """Cells where the rater's score differs significantly from the participants.

    A participant is compared with the other participants; a model rater with
    all of them. Cells with no comparison sample count as not divergent.
    """
    i = matrix.index(rater)
    others = [j for j in matrix.members(PARTICIPANT) if j != i]
    if not others:
        return 0
    count = 0
    for c in range(len(matrix.cells)):
        if mann_whitney_u([matrix.scores[i, c]], matrix.scores[others, c]).p < alpha:
            count += 1
    return count


def divergence_counts(matrix: RatingMatrix, alpha: float = ALPHA) -> dict[str, int]:
    return {r: divergence_profile(matrix, r, alpha) for r in matrix.raters}


def bootstrap_population_test(matrix: RatingMatrix, iterations: int, seed: int,
                              alpha: float = ALPHA, counts: dict[str, int] | None = None) -> float:
    """Share of random (model, participant) pairs where the model diverges more.

    Equal counts score one half, so identical populations give about 0.5. The
    counts are sorted before sampling, which makes the result independent of
    rater order within each population.
    """
    if iterations < 1:
        raise ValidationError(f"iterations must be >= 1, got {iterations}")
    vlm, ptp = matrix.members(VLM), matrix.members(PARTICIPANT)
    if len(vlm) == 0 or len(ptp) == 0:
        raise ValidationError("need at least one model rater and one participant")
    counts = counts if counts is not None else divergence_counts(matrix, alpha)
    cv = np.sort([counts[matrix.raters[i]] for i in vlm])
    cp = np.sort([counts[matrix.raters[i]] for i in ptp])
    rng = np.random.default_rng(seed)
    iv = rng.integers(0, len(cv), size=iterations)
    ip = rng.integers(0, len(cp), size=iterations)
    a, b = cv[iv], cp[ip]
    return float(((a > b).sum() + 0.5 * (a == b).sum()) / iterations)


def mode_agreement(categories_a: Sequence, categories_b: Sequence, unsuitable_mask: Sequence[bool]) -> float:
    """Fraction of masked cells whose modal categories agree."""
    a, b = np.asarray(categories_a, dtype=object), np.asarray(categories_b, dtype=object)
    mask = np.asarray(unsuitable_mask, dtype=bool)
    if not (a.shape == b.shape == mask.shape):
        raise ValidationError("category matrices and mask must share a shape")
    if not mask.any():
        raise ValidationError("no cells selected by the mask")
    return float((a[mask] == b[mask]).mean())


def _mode(values: Sequence[str]) -> str:
    counts = Counter(values)
    return min(counts, key=lambda v: (-counts[v], v))


def population_summary(matrix: RatingMatrix, population: str) -> tuple[np.ndarray, np.ndarray | None]:
    """Per-cell median score and modal category (ties: alphabetical) of a population."""
    idx = matrix.members(population)
    med = np.array([statistics.median(matrix.scores[idx, c].tolist()) for c in range(len(matrix.cells))])
    if matrix.categories is None:
        return med, None
    cats = np.array([_mode(matrix.categories[idx, c].tolist()) for c in range(len(matrix.cells))], dtype=object)
    return med, cats


# --------------------------------------------------------------------------
# CSV input and report


REQUIRED_COLUMNS = ("rater_id", "population", "scenario", "area", "score")
OPTIONAL_COLUMNS = ("category", "question")


def load_ratings_csv(text: str) -> dict[str, RatingMatrix]:
    """One matrix per question (``"all"`` without a question column)."""
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise FormatError(f"missing column(s) {missing}", "line 1")
    unknown = [c for c in header if c not in REQUIRED_COLUMNS + OPTIONAL_COLUMNS]
    if unknown:
        raise FormatError(f"unknown column(s) {unknown}", "line 1")
    has_cat = "category" in header
    rows: dict[str, dict[tuple[str, tuple[str, str]], tuple[int, str | None]]] = {}
    pops: dict[str, str] = {}
    for row in reader:
        where = f"line {reader.line_num}"
        if None in row or any(row[c] is None for c in header):
            raise FormatError("wrong number of fields", where)
        pop = row["population"].strip()
        if pop not in POPULATIONS:
            raise FormatError(f"population must be one of {POPULATIONS}, got {pop!r}", where)
        rid = row["rater_id"].strip()
        if pops.setdefault(rid, pop) != pop:
            raise FormatError(f"rater {rid!r} appears in two populations", where)
        try:
            score = int(row["score"])
        except ValueError:
            raise FormatError(f"score must be an integer, got {row['score']!r}", where) from None
        if not 1 <= score <= 5:
            raise FormatError(f"score must lie in 1..5, got {score}", where)
        q = row["question"].strip() if "question" in header else "all"
        key = (rid, (row["scenario"].strip(), row["area"].strip()))
        cells = rows.setdefault(q, {})
        if key in cells:
            raise FormatError(f"duplicate rating of {key[1]} by {rid!r}", where)
        cells[key] = (score, row["category"].strip() if has_cat else None)
    out = {}
    for q, cells in sorted(rows.items()):
        raters = tuple(sorted({r for r, _ in cells}))
        cell_ids = tuple(sorted({c for _, c in cells}))
        scores = np.zeros((len(raters), len(cell_ids)), dtype=int)
        cats = np.empty((len(raters), len(cell_ids)), dtype=object) if has_cat else None
        for i, r in enumerate(raters):
            for j, c in enumerate(cell_ids):
                if (r, c) not in cells:
                    raise FormatError(f"rater {r!r} has no rating for scenario {c[0]!r} area {c[1]!r}"
                                      + (f" (question {q})" if q != "all" else ""))
                scores[i, j], cat = cells[(r, c)]
                if cats is not None:
                    cats[i, j] = cat
        out[q] = RatingMatrix(raters, tuple(pops[r] for r in raters), cell_ids, scores, cats)
    return out


def analyze(matrices: dict[str, RatingMatrix], iterations: int, seed: int, alpha: float = ALPHA) -> dict:
    """Report with bootstrap p per question, pooled mode agreement and divergence counts."""
    p: dict[str, float | None] = {}
    divergence: dict[str, dict[str, int]] = {}
    agree_a, agree_b, mask = [], [], []
    for q, m in matrices.items():
        counts = divergence_counts(m, alpha)
        divergence[q] = counts
        has_both = len(m.members(VLM)) > 0 and len(m.members(PARTICIPANT)) > 0
        p[q] = bootstrap_population_test(m, iterations, seed, alpha, counts) if has_both else None
        if has_both and m.categories is not None:
            med_p, cat_p = population_summary(m, PARTICIPANT)
            med_v, cat_v = population_summary(m, VLM)
            agree_a.extend(cat_p)
            agree_b.extend(cat_v)
            mask.extend((med_p < 3) & (med_v < 3))
    agreement = mode_agreement(agree_a, agree_b, mask) if any(mask) else None
    return {
        "iterations": iterations,
        "seed": seed,
        "alpha": alpha,
        "p": p,
        "p_overlay": p.get("overlay"),
        "p_interaction": p.get("interaction"),
        "mode_agreement": agreement,
        "divergence": divergence,
    }


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
