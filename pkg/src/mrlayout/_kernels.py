"""JIT-compiled inner loops for the layout evaluator.

These mirror the array code in :mod:`mrlayout.geometry` and are checked
against it in the test suite. Frames, sampling order, and the slab rules
(inclusive boundaries, ``1e-9`` parallel threshold, exit point when starting
inside) must stay identical.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

PARALLEL_EPS = 1e-9
DEGENERATE = 1e-12
TIE = 1e-9
FALLOFF = 5.0


@njit(cache=True, nogil=True)
def _frame(eye, up_ref, fwd_ref, p):
    n = eye - p
    dist = math.sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2])
    r = np.zeros(3)
    u = np.zeros(3)
    if dist <= DEGENERATE:
        return n, r, u, False
    n = n / dist
    r[0] = up_ref[1] * n[2] - up_ref[2] * n[1]
    r[1] = up_ref[2] * n[0] - up_ref[0] * n[2]
    r[2] = up_ref[0] * n[1] - up_ref[1] * n[0]
    rn = math.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    if rn < 1e-9:
        r[0] = fwd_ref[1] * n[2] - fwd_ref[2] * n[1]
        r[1] = fwd_ref[2] * n[0] - fwd_ref[0] * n[2]
        r[2] = fwd_ref[0] * n[1] - fwd_ref[1] * n[0]
        rn = math.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    if rn > 0:
        r = r / rn
    u[0] = n[1] * r[2] - n[2] * r[1]
    u[1] = n[2] * r[0] - n[0] * r[2]
    u[2] = n[0] * r[1] - n[1] * r[0]
    return n, r, u, True


@njit(cache=True, nogil=True)
def _slab_t(o, d, h):
    """Hit parameter of a ray (origin ``o`` in box-local coords) or -1 on a miss."""
    t_enter = -np.inf
    t_exit = np.inf
    for a in range(3):
        if abs(d[a]) < PARALLEL_EPS:
            if abs(o[a]) > h[a]:
                return -1.0
            continue
        inv = 1.0 / d[a]
        t1 = (-h[a] - o[a]) * inv
        t2 = (h[a] - o[a]) * inv
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > t_enter:
            t_enter = t1
        if t2 < t_exit:
            t_exit = t2
    if t_exit >= t_enter and t_exit > 0.0:
        return t_enter if t_enter > 0.0 else t_exit
    return -1.0


@njit(cache=True, nogil=True)
def element_terms(positions, offsets, eye, fwd, up_ref, o_rel, halves, penalty, inter,
                  d_min, d_max, half_angle, ref_dist, clip):
    """(P, 6) [look, distance, fov, view, overlay, interaction-without-f_v] per position."""
    P = positions.shape[0]
    G = offsets.shape[0]
    B = o_rel.shape[0]
    out = np.empty((P, 6))
    hnorm = np.empty(B)
    for b in range(B):
        hnorm[b] = math.sqrt(halves[b, 0] ** 2 + halves[b, 1] ** 2 + halves[b, 2] ** 2)
    for i in range(P):
        p = positions[i]
        n, r, u, ok = _frame(eye, up_ref, fwd, p)
        if not ok:
            out[i, :] = np.inf
            continue
        v = p - eye
        d = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        cos = (v[0] * fwd[0] + v[1] * fwd[1] + v[2] * fwd[2]) / d
        cos = min(1.0, max(-1.0, cos))
        theta = math.acos(cos)
        out[i, 0] = (1.0 - cos) / 2.0
        if d < d_min:
            out[i, 1] = ((d - d_min) / d_min) ** 2
        elif d > d_max:
            out[i, 1] = ((d - d_max) / d_max) ** 2
        else:
            out[i, 1] = 0.0
        out[i, 2] = ((theta - half_angle) / half_angle) ** 2 if theta > half_angle else 0.0
        out[i, 3] = (1.0 - ref_dist / d) ** 2
        over = 0.0
        act = 0.0
        dr = np.empty(3)
        for g in range(G):
            a = offsets[g, 0]
            c = offsets[g, 1]
            x = p[0] + a * r[0] + c * u[0] - eye[0]
            y = p[1] + a * r[1] + c * u[1] - eye[1]
            z = p[2] + a * r[2] + c * u[2] - eye[2]
            length = math.sqrt(x * x + y * y + z * z)
            if length <= DEGENERATE:
                continue
            dr[0] = x / length
            dr[1] = y / length
            dr[2] = z / length
            for b in range(B):
                t = _slab_t(o_rel[b], dr, halves[b])
                if t < 0.0:
                    continue
                if clip and t > length * (1 + 1e-12):
                    continue
                acc = 0.0
                for a in range(3):
                    x = o_rel[b, a] + t * dr[a]
                    x = min(halves[b, a], max(-halves[b, a], x))
                    acc += x * x
                dh = min(math.sqrt(acc) / hnorm[b], 1.0)
                w = math.exp(-FALLOFF * dh)
                over += penalty[b] * w
                act += inter[b] * w
        out[i, 4] = over
        out[i, 5] = act
    return out


@njit(cache=True, nogil=True)
def _bundles(positions, offsets, eye, fwd, up_ref):
    V = positions.shape[0]
    G = offsets.shape[1]
    frames = np.zeros((V, 3, 3))
    ok = np.zeros(V, dtype=np.bool_)
    dirs = np.zeros((V, G, 3))
    lens = np.zeros((V, G))
    for v in range(V):
        n, r, u, fine = _frame(eye, up_ref, fwd, positions[v])
        ok[v] = fine
        frames[v, 0] = n
        frames[v, 1] = r
        frames[v, 2] = u
        for g in range(G):
            a = offsets[v, g, 0]
            c = offsets[v, g, 1]
            x = positions[v, 0] + a * r[0] + c * u[0] - eye[0]
            y = positions[v, 1] + a * r[1] + c * u[1] - eye[1]
            z = positions[v, 2] + a * r[2] + c * u[2] - eye[2]
            length = math.sqrt(x * x + y * y + z * z)
            lens[v, g] = length
            if length > DEGENERATE:
                dirs[v, g, 0] = x / length
                dirs[v, g, 1] = y / length
                dirs[v, g, 2] = z / length
    return frames, ok, dirs, lens


@njit(cache=True, nogil=True, inline="always")
def _blocks(dirs, lens, v, g, eye, positions, frames, u, hw, hh, front):
    """Whether ray g of element v crosses rectangle u before reaching its sample."""
    denom = dirs[v, g, 0] * frames[u, 0, 0] + dirs[v, g, 1] * frames[u, 0, 1] + dirs[v, g, 2] * frames[u, 0, 2]
    if abs(denom) <= 1e-12:
        return False
    rel0 = positions[u, 0] - eye[0]
    rel1 = positions[u, 1] - eye[1]
    rel2 = positions[u, 2] - eye[2]
    t = (frames[u, 0, 0] * rel0 + frames[u, 0, 1] * rel1 + frames[u, 0, 2] * rel2) / denom
    if t <= 0.0:
        return False
    length = lens[v, g]
    if not (t < length - TIE or (abs(t - length) <= TIE and front)):
        return False
    q0 = t * dirs[v, g, 0] - rel0
    q1 = t * dirs[v, g, 1] - rel1
    q2 = t * dirs[v, g, 2] - rel2
    lr = q0 * frames[u, 1, 0] + q1 * frames[u, 1, 1] + q2 * frames[u, 1, 2]
    lu = q0 * frames[u, 2, 0] + q1 * frames[u, 2, 1] + q2 * frames[u, 2, 2]
    return abs(lr) <= hw + TIE and abs(lu) <= hh + TIE


@njit(cache=True, nogil=True)
def occlusion(positions, offsets, half_w, half_h, eye, fwd, up_ref):
    """(V,) summed fraction of each element's rays crossing an earlier rectangle.

    ``offsets`` is (V, G, 2). On exact depth ties the element listed first is
    in front.
    """
    V = positions.shape[0]
    G = offsets.shape[1]
    out = np.zeros(V)
    if V < 2:
        return out
    frames, ok, dirs, lens = _bundles(positions, offsets, eye, fwd, up_ref)
    # angular radius of each rectangle seen from the eye; pairs whose cones are
    # disjoint cannot block each other
    radius = np.empty(V)
    for v in range(V):
        dist = math.sqrt((positions[v, 0] - eye[0]) ** 2 + (positions[v, 1] - eye[1]) ** 2
                         + (positions[v, 2] - eye[2]) ** 2)
        diag = math.sqrt(half_w[v] ** 2 + half_h[v] ** 2)
        radius[v] = math.asin(diag / dist) if ok[v] and diag < dist else math.pi
    for v in range(V):
        if not ok[v]:
            continue
        total = 0
        for u in range(V):
            if u == v or not ok[u]:
                continue
            if radius[u] + radius[v] < math.pi:
                c = (frames[u, 0, 0] * frames[v, 0, 0] + frames[u, 0, 1] * frames[v, 0, 1]
                      + frames[u, 0, 2] * frames[v, 0, 2])
                if math.acos(min(1.0, max(-1.0, c))) > radius[u] + radius[v] + 1e-6:
                    continue
            for g in range(G):
                if lens[v, g] <= DEGENERATE:
                    continue
                if _blocks(dirs, lens, v, g, eye, positions, frames, u, half_w[u], half_h[u], u < v):
                    total += 1
        out[v] = total / G
    return out


@njit(cache=True, nogil=True)
def occlusion_sweep(k, candidates, positions, offsets, half_w, half_h, eye, fwd, up_ref, w_occ):
    """Weighted occlusion sum of the whole layout for each candidate position of element k."""
    P = candidates.shape[0]
    out = np.empty(P)
    pos = positions.copy()
    for i in range(P):
        pos[k] = candidates[i]
        occ = occlusion(pos, offsets, half_w, half_h, eye, fwd, up_ref)
        s = 0.0
        for v in range(pos.shape[0]):
            s += w_occ[v] * occ[v]
        out[i] = s
    return out


@njit(cache=True, nogil=True)
def is_hidden(p, eye, o_rel, halves):
    """Whether the segment from the eye to ``p`` enters an entity box before ``p``.

    Boxes that contain the eye are ignored.
    """
    x = p[0] - eye[0]
    y = p[1] - eye[1]
    z = p[2] - eye[2]
    length = math.sqrt(x * x + y * y + z * z)
    if length <= DEGENERATE:
        return False
    d = np.empty(3)
    d[0] = x / length
    d[1] = y / length
    d[2] = z / length
    for b in range(o_rel.shape[0]):
        if (abs(o_rel[b, 0]) <= halves[b, 0] and abs(o_rel[b, 1]) <= halves[b, 1]
                and abs(o_rel[b, 2]) <= halves[b, 2]):
            continue
        t = _slab_t(o_rel[b], d, halves[b])
        if t >= 0.0 and t < length - 1e-12:
            return True
    return False


@njit(cache=True, nogil=True)
def hidden_mask(positions, eye, o_rel, halves):
    out = np.zeros(positions.shape[0], dtype=np.bool_)
    for i in range(positions.shape[0]):
        out[i] = is_hidden(positions[i], eye, o_rel, halves)
    return out


@njit(cache=True, nogil=True)
def _element_cost(k, X, offsets, eye, fwd, up_ref, o_rel, halves, penalty, inter, freq, W,
                  d_min, d_max, half_angle, ref_dist, clip, visible_only):
    if visible_only and is_hidden(X[k], eye, o_rel, halves):
        return np.inf
    t = element_terms(X[k:k + 1], offsets[k], eye, fwd, up_ref, o_rel, halves, penalty, inter,
                      d_min, d_max, half_angle, ref_dist, clip)
    s = 0.0
    for j in range(6):
        if not math.isfinite(t[0, j]):
            return np.inf
        c = t[0, j] * freq[k] if j == 5 else t[0, j]
        s += W[k, j + 1] * c
    return s


@njit(cache=True, nogil=True)
def _search_objective(X, own, offsets, half_w, half_h, eye, fwd, up_ref, W, lam, prev):
    V = X.shape[0]
    s = 0.0
    for k in range(V):
        s += own[k]
    if not math.isfinite(s):
        return np.inf
    if V > 1:
        occ = occlusion(X, offsets, half_w, half_h, eye, fwd, up_ref)
        for k in range(V):
            s += W[k, 0] * occ[k]
    if lam > 0.0:
        for k in range(V):
            for a in range(3):
                s += lam * (X[k, a] - prev[k, a]) ** 2
    return s


@njit(cache=True, nogil=True)
def anneal(X0, picks, noise, coins, temps, steps, probe_picks, probes, lo, hi, offsets, half_w, half_h, eye, fwd,
           up_ref, o_rel, halves, penalty, inter, freq, W, d_min, d_max, half_angle, ref_dist,
           clip, visible_only, lam, prev):
    """One annealing run with pre-drawn randomness.

    Step ``i`` moves element ``picks[i]`` by ``steps[i] * noise[i]``, clipped
    to ``[lo, hi]``, and accepts uphill moves when ``coins[i] < exp(-delta / temps[i])``.
    Temperatures are in units of the mean absolute objective change over the
    probe moves ``steps[0] * probes`` from the start, so the schedule does not
    depend on the scale of Q.
    The search objective is Q plus ``lam * sum |x - prev|^2``. Returns the best
    positions, their objective, and the best-so-far objective after every step
    (entry 0 is the start).
    """
    V = X0.shape[0]
    n = picks.shape[0]
    X = X0.copy()
    own = np.empty(V)
    for k in range(V):
        own[k] = _element_cost(k, X, offsets, eye, fwd, up_ref, o_rel, halves, penalty, inter, freq,
                               W, d_min, d_max, half_angle, ref_dist, clip, visible_only)

    cur = _search_objective(X, own, offsets, half_w, half_h, eye, fwd, up_ref, W, lam, prev)
    # temperature unit: mean |change| of the objective over the probe moves
    total = 0.0
    count = 0
    for i in range(probes.shape[0]):
        k = probe_picks[i]
        old = X[k].copy()
        old_own = own[k]
        for a in range(3):
            X[k, a] = min(hi[a], max(lo[a], X[k, a] + steps[0] * probes[i, a]))
        own[k] = _element_cost(k, X, offsets, eye, fwd, up_ref, o_rel, halves, penalty, inter, freq,
                               W, d_min, d_max, half_angle, ref_dist, clip, visible_only)
        cand = _search_objective(X, own, offsets, half_w, half_h, eye, fwd, up_ref, W, lam, prev)
        if math.isfinite(cand) and math.isfinite(cur):
            total += abs(cand - cur)
            count += 1
        X[k] = old
        own[k] = old_own
    unit = total / count if count > 0 and total > 0.0 else 1.0
    best = cur
    best_X = X.copy()
    trace = np.empty(n + 1)
    trace[0] = best
    for i in range(n):
        k = picks[i]
        old = X[k].copy()
        old_own = own[k]
        for a in range(3):
            X[k, a] = min(hi[a], max(lo[a], X[k, a] + steps[i] * noise[i, a]))
        own[k] = _element_cost(k, X, offsets, eye, fwd, up_ref, o_rel, halves, penalty, inter, freq,
                               W, d_min, d_max, half_angle, ref_dist, clip, visible_only)
        cand = _search_objective(X, own, offsets, half_w, half_h, eye, fwd, up_ref, W, lam, prev)
        delta = cand - cur
        if cand <= cur or (math.isfinite(cand) and coins[i] < math.exp(-delta / (temps[i] * unit))):
            cur = cand
            if cand < best:
                best = cand
                best_X[:, :] = X
        else:
            X[k] = old
            own[k] = old_own
        trace[i + 1] = best
    return best_X, best, trace


@njit(cache=True, nogil=True)
def polish(X0, step, min_step, max_evals, lo, hi, offsets, half_w, half_h, eye, fwd, up_ref,
           o_rel, halves, penalty, inter, freq, W, d_min, d_max, half_angle, ref_dist, clip,
           visible_only, lam, prev):
    """Compass search: try +-step along each axis of each element, keep strict
    improvements, halve the step after a pass without one."""
    V = X0.shape[0]
    X = X0.copy()
    own = np.empty(V)
    for k in range(V):
        own[k] = _element_cost(k, X, offsets, eye, fwd, up_ref, o_rel, halves, penalty, inter, freq,
                               W, d_min, d_max, half_angle, ref_dist, clip, visible_only)
    cur = _search_objective(X, own, offsets, half_w, half_h, eye, fwd, up_ref, W, lam, prev)
    evals = 0
    h = step
    while h >= min_step and evals < max_evals:
        improved = False
        for k in range(V):
            for a in range(3):
                for sign in (1.0, -1.0):
                    old = X[k, a]
                    old_own = own[k]
                    X[k, a] = min(hi[a], max(lo[a], old + sign * h))
                    if X[k, a] == old:
                        continue
                    own[k] = _element_cost(k, X, offsets, eye, fwd, up_ref, o_rel, halves, penalty,
                                           inter, freq, W, d_min, d_max, half_angle, ref_dist, clip,
                                           visible_only)
                    cand = _search_objective(X, own, offsets, half_w, half_h, eye, fwd, up_ref, W,
                                             lam, prev)
                    evals += 1
                    if cand < cur:
                        cur = cand
                        improved = True
                    else:
                        X[k, a] = old
                        own[k] = old_own
        if not improved:
            h *= 0.5
    return X, cur
