"""Independent reference computations used by tests and the verify batteries.

Nothing here shares code with the production solvers: the flat distance is
recovered by brute-force search over test-function values, and the closed
forms are written out directly.
"""
from __future__ import annotations

import numpy as np

from .exceptions import InvalidArgumentError


def dirac_flat_distance(a: float, b: float, d: float) -> float:
    """Flat distance between ``a * delta_x`` and ``b * delta_y`` with ``d(x, y) = d``."""
    return abs(a - b) + min(a, b) * min(d, 2.0)


def _merged_coefficients(mu, nu):
    space = mu.space
    locs = np.concatenate([mu.locations, nu.locations])
    w = np.concatenate([mu.weights, -nu.weights])
    if locs.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    D = space.pairwise(locs)
    owner = list(range(len(w)))
    for i in range(len(w)):
        for j in range(i):
            if D[i, j] == 0 and owner[j] == j:
                owner[i] = j
                break
    roots = sorted(set(owner))
    coeff = np.array([sum(w[k] for k in range(len(w)) if owner[k] == r) for r in roots])
    D = D[np.ix_(roots, roots)]
    keep = coeff != 0
    return coeff[keep], D[np.ix_(keep, keep)]


def flat_distance_grid(mu, nu, step: float = 1e-3) -> float:
    """Brute-force flat distance by grid search over test-function values.

    The smaller sign class of ``mu - nu`` is gridded (at most three points).
    For a fixed assignment on that class the best values on the other class
    are the lower McShane envelope, which is admissible by the triangle
    inequality. With three gridded points the last one is optimised exactly:
    the objective is concave and piecewise linear in it, so checking its
    breakpoints suffices.
    """
    c, D = _merged_coefficients(mu, nu)
    if c.size == 0:
        return 0.0
    pos, neg = np.flatnonzero(c > 0), np.flatnonzero(c < 0)
    if pos.size == 0 or neg.size == 0:
        return float(np.sum(np.abs(c)))
    if neg.size < pos.size:
        c = -c
        pos, neg = neg, pos
    G, H = pos, neg
    if G.size > 3:
        raise InvalidArgumentError("grid oracle supports at most three points per sign class")
    cG, cH = c[G], c[H]
    DGH = D[np.ix_(G, H)]
    vals = np.round(np.arange(-1.0, 1.0 + step / 2, step), 12)

    if G.size == 1:
        f1 = vals
        env = np.maximum(-1.0, f1[:, None] - DGH[0])
        return float(np.max(f1 * cG[0] + env @ cH))

    f1 = vals[:, None]
    f2 = vals[None, :]
    ok = np.abs(f1 - f2) <= D[G[0], G[1]] + 1e-12
    if G.size == 2:
        obj = f1 * cG[0] + f2 * cG[1]
        for j in range(H.size):
            obj = obj + cH[j] * np.maximum(np.maximum(f1 - DGH[0, j], f2 - DGH[1, j]), -1.0)
        return float(np.max(np.where(ok, obj, -np.inf)))

    d13, d23 = D[G[0], G[2]], D[G[1], G[2]]
    lo = np.maximum(np.maximum(f1 - d13, f2 - d23), -1.0)
    hi = np.minimum(np.minimum(f1 + d13, f2 + d23), 1.0)
    ok &= lo <= hi + 1e-12
    # envelope on H from the two gridded points; the third enters below
    m = [np.maximum(np.maximum(f1 - DGH[0, j], f2 - DGH[1, j]), -1.0) for j in range(H.size)]
    d3 = DGH[2]
    base = f1 * cG[0] + f2 * cG[1]
    best = -np.inf
    for g in [lo, hi] + [np.clip(m[j] + d3[j], lo, hi) for j in range(H.size)]:
        obj = base + g * cG[2]
        for j in range(H.size):
            obj = obj + cH[j] * np.maximum(m[j], g - d3[j])
        best = max(best, float(np.max(np.where(ok, obj, -np.inf))))
    return best


def logistic_mass(t, m0: float, r: float, K: float):
    """Closed-form solution of ``m' = r m (1 - m / K)``."""
    e = np.exp(r * np.asarray(t, dtype=float))
    return K * m0 * e / (K + m0 * (e - 1.0))


def floyd_warshall(n_vertices: int, edges) -> np.ndarray:
    """All-pairs shortest paths by the textbook triple loop."""
    D = np.full((n_vertices, n_vertices), np.inf)
    np.fill_diagonal(D, 0.0)
    for i, j, w in edges:
        D[i, j] = min(D[i, j], w)
        D[j, i] = min(D[j, i], w)
    for k in range(n_vertices):
        D = np.minimum(D, D[:, k:k + 1] + D[k:k + 1, :])
    return D
