"""Independent reference implementations used as test oracles.

These are written differently from the package code on purpose: dense
matrices and brute-force loops instead of trees, kernels and vectorized
slabs.
"""
from __future__ import annotations

import math

import numpy as np


def dbscan_reference(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Quadratic-time DBSCAN labels (-1 for noise).

    Core points are grouped into connected components of the eps graph with
    union-find. Components are numbered by their smallest core index, and a
    border point joins the lowest-numbered component among its core
    neighbours.
    """
    n = len(points)
    if n == 0:
        return np.zeros(0, dtype=int)
    d = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2))
    adj = d <= eps
    core = adj.sum(axis=1) >= min_pts
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        if not core[i]:
            continue
        for j in range(i + 1, n):
            if core[j] and adj[i, j]:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    roots = sorted({find(i) for i in range(n) if core[i]})
    number = {r: k for k, r in enumerate(roots)}
    labels = np.full(n, -1, dtype=int)
    for i in range(n):
        if core[i]:
            labels[i] = number[find(i)]
        else:
            comps = [number[find(j)] for j in range(n) if core[j] and adj[i, j]]
            if comps:
                labels[i] = min(comps)
    return labels


def fibonacci_sphere(n: int, center, radius: float) -> np.ndarray:
    k = np.arange(n) + 0.5
    phi = np.arccos(1.0 - 2.0 * k / n)
    theta = math.pi * (1.0 + math.sqrt(5.0)) * k
    unit = np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])
    return np.asarray(center, dtype=float) + radius * unit


def visible_cap_count(n: int, radius: float, distance: float) -> float:
    """Expected number of evenly spread sphere points seen from an exterior point.

    The visible region is the cap bounded by the tangent cone, whose area is
    (1 - r/D)/2 of the sphere.
    """
    return n * (1.0 - radius / distance) / 2.0


def aabb_iou(c1, h1, c2, h2) -> float:
    c1, h1, c2, h2 = (np.asarray(v, dtype=float) for v in (c1, h1, c2, h2))
    overlap = np.clip(np.minimum(c1 + h1, c2 + h2) - np.maximum(c1 - h1, c2 - h2), 0.0, None)
    inter = float(np.prod(overlap))
    return inter / (float(np.prod(2 * h1)) + float(np.prod(2 * h2)) - inter)


def mwu_reference(a, b) -> float:
    """U statistic of ``a`` by direct pair counting, ties counted as 1/2."""
    return sum(1.0 if x > y else 0.5 if x == y else 0.0 for x in a for y in b)


def exact_two_sided_p(a, b) -> float:
    """Exact two-sided Mann-Whitney p by enumerating every relabeling of the pooled data."""
    from itertools import combinations

    pooled = list(a) + list(b)
    n = len(pooled)
    obs = mwu_reference(a, b)
    mean = len(a) * len(b) / 2.0
    dev = abs(obs - mean)
    hits = total = 0
    for idx in combinations(range(n), len(a)):
        s = set(idx)
        u = mwu_reference([pooled[i] for i in idx], [pooled[i] for i in range(n) if i not in s])
        total += 1
        hits += abs(u - mean) >= dev - 1e-12
    return hits / total
