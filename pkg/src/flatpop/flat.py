"""Flat (dual bounded-Lipschitz) distance between atomic measures.

For measures supported on finitely many points the supremum over test
functions with ``max(||psi||_inf, Lip(psi)) <= 1`` only depends on the
values ``f_i = psi(x_i)``: any admissible assignment extends to the whole
space (McShane extension clipped to ``[-1, 1]``). The distance is therefore
the value of a small linear program, solved here with HiGHS.

Graphs, the line and the circle use the dual program with a linear number of
Lipschitz constraints. Other backends solve the equivalent partial transport
problem (cost ``min(d, 2)``, unit price for creating or destroying mass),
which has one variable per positive/negative pair within distance 2 and is
much smaller than the dual with all pairwise constraints.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from .exceptions import InvalidArgumentError
from .measures import AtomicMeasure, MeasurePath, row_groups
from .spaces import CircleSpace, EuclideanSpace, GraphSpace

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


@dataclass
class FlatLP:
    """Assembled flat-norm program and, once solved, its optimum."""

    support: np.ndarray
    coeff: np.ndarray
    dmat: np.ndarray
    value: float = 0.0
    f: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_json(self, space=None) -> str:
        locs = ([space.format_point(x) for x in self.support] if space is not None
                else np.asarray(self.support).tolist())
        return json.dumps({"coeff": self.coeff.tolist(), "f": np.asarray(self.f).tolist(),
                           "support": locs, "value": self.value}, sort_keys=True, indent=2)


def _signed_support(mu: AtomicMeasure, nu: AtomicMeasure):
    """Merge both supports into distinct points with net coefficients.

    Points are put in lexicographic order and the coefficient sign is fixed so
    that swapping ``mu`` and ``nu`` yields the very same program.
    """
    space = mu.space
    locs = np.concatenate([mu.locations, nu.locations])
    n_mu = len(mu)
    if locs.shape[0] == 0:
        return space.empty_points(), np.zeros(0)
    flat = locs.reshape(locs.shape[0], -1) + 0.0
    first, inverse = row_groups(flat)
    # lexicographic order makes the program independent of argument order
    lex = np.lexsort(flat[first].T[::-1])
    relabel = np.empty_like(lex)
    relabel[lex] = np.arange(lex.size)
    inverse = relabel[inverse]
    uniq = flat[first[lex]]
    m = uniq.shape[0]
    plus = np.bincount(inverse[:n_mu], weights=mu.weights, minlength=m)
    minus = np.bincount(inverse[n_mu:], weights=nu.weights, minlength=m)
    coeff = plus - minus
    support = uniq.reshape((m,) + locs.shape[1:])

    # distinct payloads at distance zero (should not happen for the shipped
    # backends, but cheap to guard against)
    if m > 1:
        d = space._pairwise(support, support)
        np.fill_diagonal(d, 1.0)
        if np.any(d == 0):
            label = np.arange(m)
            for i in range(m):
                for j in np.flatnonzero(d[i, : i] == 0):
                    label[i] = label[j]
                    break
            keep = label == np.arange(m)
            coeff = np.bincount(label, weights=coeff, minlength=m)[keep]
            support = support[keep]

    nz = coeff != 0
    return support[nz], coeff[nz]


def _graph_constraints(space: GraphSpace, support):
    """Edge-local constraints on the support refined by all graph vertices.

    Returns extra vertex variables (appended after the support) and index
    pairs with lengths. Consecutive points along each edge suffice because the
    graph metric is the path metric of this subdivision.
    """
    n = support.shape[0]
    nv = space.n_vertices
    rows_i, rows_j, lens = [], [], []
    edges = support[:, 0].astype(int)
    offs = support[:, 1]
    # support points sitting on a vertex are identified with that vertex variable
    var = np.arange(n)
    vertex_of = {}
    for k in range(n):
        e, s = edges[k], offs[k]
        if s == 0:
            vertex_of[k] = space.tails[e]
        elif s == space.lengths[e]:
            vertex_of[k] = space.heads[e]
    for k, v in vertex_of.items():
        var[k] = n + v
    for e in range(len(space.edges)):
        on_edge = np.flatnonzero((edges == e) & (offs > 0) & (offs < space.lengths[e]))
        order = on_edge[np.argsort(offs[on_edge], kind="stable")]
        chain = [n + space.tails[e]] + var[order].tolist() + [n + space.heads[e]]
        pos = [0.0] + offs[order].tolist() + [space.lengths[e]]
        for a in range(len(chain) - 1):
            rows_i.append(chain[a])
            rows_j.append(chain[a + 1])
            lens.append(pos[a + 1] - pos[a])
    return var, n + nv, np.array(rows_i), np.array(rows_j), np.array(lens)


def _solve_lp(n_var, obj, ii, jj, dd):
    """Maximise ``obj . f`` over ``|f| <= 1`` and ``|f_i - f_j| <= dd``."""
    if ii.size:
        m = ii.size
        rows = np.concatenate([np.arange(m), np.arange(m), m + np.arange(m), m + np.arange(m)])
        cols = np.concatenate([ii, jj, ii, jj])
        vals = np.concatenate([np.ones(m), -np.ones(m), -np.ones(m), np.ones(m)])
        A = coo_matrix((vals, (rows, cols)), shape=(2 * m, n_var)).tocsr()
        b = np.concatenate([dd, dd])
    else:
        A, b = None, None
    res = linprog(-obj, A_ub=A, b_ub=b, bounds=(-1.0, 1.0), method="highs",
                  options=_HIGHS_OPTIONS)
    if res.status != 0:
        raise RuntimeError(f"flat-norm LP failed: {res.message}")
    return -res.fun, res.x


def _transport_lp(coeff, dmat):
    """Flat norm of ``sum coeff_i delta_i`` as a partial transport problem.

    Maximises ``sum (2 - d_ij) pi_ij`` over plans from the positive to the
    negative part with row and column sums capped by the coefficients; the
    distance is ``sum |coeff|`` minus that gain. The duals ``y`` give test
    values ``1 - y`` on the positive and ``y - 1`` on the negative part; their
    clipped lower McShane envelope is an admissible certificate that is
    at least as good, hence optimal.
    """
    P, N = np.flatnonzero(coeff > 0), np.flatnonzero(coeff < 0)
    total = float(np.sum(np.abs(coeff)))
    D = dmat[np.ix_(P, N)]
    ii, jj = np.nonzero(D < 2.0)
    if ii.size == 0:
        return total, np.sign(coeff)
    m = ii.size
    rows = np.concatenate([ii, P.size + jj])
    cols = np.concatenate([np.arange(m), np.arange(m)])
    A = coo_matrix((np.ones(2 * m), (rows, cols)), shape=(P.size + N.size, m)).tocsr()
    cap = np.concatenate([coeff[P], -coeff[N]])
    res = linprog(-(2.0 - D[ii, jj]), A_ub=A, b_ub=cap, bounds=(0.0, None), method="highs",
                  options=_HIGHS_OPTIONS)
    if res.status != 0:
        raise RuntimeError(f"flat-norm LP failed: {res.message}")
    fP = np.clip(1.0 + res.ineqlin.marginals[: P.size], -1.0, 1.0)
    f = np.max(fP[:, None] - dmat[P, :], axis=0)
    f = np.clip(f, -1.0, 1.0)
    return total + res.fun, f


def flat_lp(mu: AtomicMeasure, nu: AtomicMeasure) -> FlatLP:
    """Assemble and solve the flat-norm program for ``mu - nu``."""
    if mu.space != nu.space:
        raise InvalidArgumentError("flat distance needs measures on the same space")
    space = mu.space
    support, coeff = _signed_support(mu, nu)
    n = coeff.size
    if n == 0:
        return FlatLP(support, coeff, np.zeros((0, 0)), 0.0, np.zeros(0))
    dmat = space._pairwise(support, support)
    sign = 1.0 if coeff[0] > 0 else -1.0
    c = sign * coeff

    if n == 1:
        return FlatLP(support, coeff, dmat, float(abs(coeff[0])), np.array([sign]))

    if isinstance(space, GraphSpace):
        var, n_var, ii, jj, dd = _graph_constraints(space, support)
        obj = np.zeros(n_var)
        np.add.at(obj, var, c)
        value, x = _solve_lp(n_var, obj, ii, jj, dd)
        f = x[var]
    elif isinstance(space, CircleSpace) or (isinstance(space, EuclideanSpace) and space.dim == 1):
        ii, jj = space.lp_pairs(support, dmat)
        value, f = _solve_lp(n, c, ii, jj, dmat[ii, jj])
    else:
        value, f = _transport_lp(c, dmat)
    value = min(max(value, 0.0), float(np.sum(np.abs(coeff))))
    return FlatLP(support, coeff, dmat, value, sign * f)


def flat_distance(mu: AtomicMeasure, nu: AtomicMeasure, verbose: bool = False) -> float:
    """Flat distance ``sup { int psi d(mu - nu) : ||psi||_BL <= 1 }``.

    With ``verbose=True`` the solved program is printed as JSON.
    """
    lp = flat_lp(mu, nu)
    if verbose:
        print(lp.to_json(mu.space))
    return lp.value


def flat_norm(mu: AtomicMeasure) -> float:
    """Flat norm of a nonnegative measure, which is simply its mass."""
    return mu.mass


def bl_seminorms(values, dmat):
    """Return ``(sup |psi|, Lip(psi))`` for samples ``values`` with distances ``dmat``."""
    v = np.asarray(values, dtype=float).reshape(-1)
    D = np.asarray(dmat, dtype=float)
    if v.size == 0:
        raise InvalidArgumentError("need at least one sample point")
    if D.shape != (v.size, v.size):
        raise InvalidArgumentError("distance matrix does not match the samples")
    sup = float(np.max(np.abs(v)))
    if v.size == 1:
        return sup, 0.0
    iu, ju = np.triu_indices(v.size, k=1)
    dv = np.abs(v[iu] - v[ju])
    d = D[iu, ju]
    zero = d == 0
    if np.any(dv[zero] > 0):
        raise InvalidArgumentError("different values at zero distance")
    ratio = np.divide(dv, d, out=np.zeros_like(dv), where=~zero)
    return sup, float(np.max(ratio))


def _quadrature_weights(grid, f):
    """Left-endpoint cumulative integrals ``Q_k`` of ``f`` over ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if callable(f):
        fv = np.array([f(t) for t in grid[:-1]], dtype=float)
    else:
        fv = np.broadcast_to(np.asarray(f, dtype=float), grid.shape).astype(float)[:-1]
    if np.any(fv < 0):
        raise InvalidArgumentError("Bielecki weight must be nonnegative")
    return np.concatenate([[0.0], np.cumsum(fv * np.diff(grid))])


def snapshot_distances(p: MeasurePath, q: MeasurePath) -> np.ndarray:
    """Flat distance between ``p`` and ``q`` at every grid time."""
    if not p.same_grid(q):
        raise InvalidArgumentError("paths live on different grids")
    return np.array([0.0 if _identical(a, b) else flat_distance(a, b)
                     for a, b in zip(p.snapshots, q.snapshots)])


def _identical(a, b):
    return a is b or (np.array_equal(a.weights, b.weights) and np.array_equal(a.locations, b.locations))


def bielecki_weights(grid, lam, f) -> np.ndarray:
    if not lam >= 0:
        raise InvalidArgumentError("lambda must be nonnegative")
    return np.exp(-lam * _quadrature_weights(grid, f))


def bielecki_distance(p: MeasurePath, q: MeasurePath, lam: float, f=1.0) -> float:
    """``max_k exp(-lam * Q_k) * rho_F(p_k, q_k)`` with ``Q_k`` the left sum of ``f``."""
    w = bielecki_weights(p.grid, lam, f)
    return float(np.max(w * snapshot_distances(p, q)))


def sup_flat_distance(p: MeasurePath, q: MeasurePath) -> float:
    return float(np.max(snapshot_distances(p, q)))


def continuity_moduli(path: MeasurePath) -> np.ndarray:
    """Consecutive flat distances divided by the step, a narrow-continuity proxy."""
    if len(path) < 2:
        return np.zeros(0)
    d = np.array([flat_distance(a, b) for a, b in zip(path.snapshots[:-1], path.snapshots[1:])])
    return d / np.diff(path.grid)


def neighborhood_mass_gap(mu: AtomicMeasure, nu: AtomicMeasure, T, delta: float) -> float:
    """``nu(U_delta(T)) + rho_F(mu, nu) / delta - mu(T)`` for a finite point set ``T``.

    ``U_delta(T)`` is the open ``delta``-neighbourhood. The value is never
    negative for ``delta`` in ``(0, 1]``.
    """
    if not 0 < delta <= 1:
        raise InvalidArgumentError("delta must lie in (0, 1]")
    space = mu.space
    T = space.as_points(T) if np.size(T) else space.empty_points()
    if T.shape[0] == 0:
        return flat_distance(mu, nu) / delta
    mu_T = float(np.sum(mu.weights[np.min(space._pairwise(mu.locations, T), axis=1) == 0])) if len(mu) else 0.0
    nu_U = float(np.sum(nu.weights[np.min(space._pairwise(nu.locations, T), axis=1) < delta])) if len(nu) else 0.0
    return nu_U + flat_distance(mu, nu) / delta - mu_T
