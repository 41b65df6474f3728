"""Plain numpy occlusion reference used to cross-check the compiled kernel."""
import numpy as np


def occlusion_ref(X, off, hw, hh, eye, fwd, up):
    V, G = off.shape[:2]
    out = np.zeros(V)
    frames = []
    for p in X:
        n = eye - p
        n = n / np.linalg.norm(n)
        r = np.cross(up, n)
        if np.linalg.norm(r) < 1e-9:
            r = np.cross(fwd, n)
        r = r / np.linalg.norm(r)
        frames.append((n, r, np.cross(n, r)))
    for v in range(V):
        n, r, u = frames[v]
        count = 0
        for g in range(G):
            s = X[v] + off[v, g, 0] * r + off[v, g, 1] * u
            L = np.linalg.norm(s - eye)
            d = (s - eye) / L
            for w in range(V):
                if w == v:
                    continue
                nw, rw, uw = frames[w]
                den = d @ nw
                if abs(den) <= 1e-12:
                    continue
                t = nw @ (X[w] - eye) / den
                if t <= 0:
                    continue
                if not (t < L - 1e-9 or (abs(t - L) <= 1e-9 and w < v)):
                    continue
                q = eye + t * d - X[w]
                if abs(q @ rw) <= hw[w] + 1e-9 and abs(q @ uw) <= hh[w] + 1e-9:
                    count += 1
        out[v] = count / G
    return out
