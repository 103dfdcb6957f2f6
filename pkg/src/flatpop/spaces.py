"""Metric-space backends.

Every backend stores points as rows of a numpy array whose trailing shape is
``space.point_shape``. All distance computations are vectorised through
:meth:`MetricSpace.pairwise`; the scalar :func:`distance` is a thin wrapper.

Backends
--------
euclidean   R^d with the Euclidean norm.
circle      circle of given circumference with the arc-length metric.
discrete    finitely many labelled points, all at mutual distance ``scale``.
graph       metric graph; points live on edges as ``(edge, offset)`` pairs.
trajectory  sample vectors on a fixed time grid with the sup-metric over the
            grid (a finite-dimensional stand-in for ``C^0([0,T]; X)``).
"""
from __future__ import annotations

import math

import numpy as np
from scipy.sparse.csgraph import connected_components, shortest_path

from .exceptions import ConfigurationError, InvalidArgumentError

# pairs beyond this support size skip the O(n^3) redundancy pruning
_PRUNE_LIMIT = 80


class MetricSpace:
    """Common interface for all backends; subclasses are immutable."""

    kind = "abstract"
    point_shape: tuple = ()

    # -- construction helpers -------------------------------------------------
    def as_points(self, X) -> np.ndarray:
        """Validate ``X`` and return a read-only ``(n, *point_shape)`` array."""
        raise NotImplementedError

    def as_point(self, x) -> np.ndarray:
        pts = self.as_points(np.asarray(x, dtype=float)[None, ...])
        if pts.shape[0] != 1:
            raise InvalidArgumentError(f"expected a single point of {self.kind} space")
        return pts[0]

    # -- metric ---------------------------------------------------------------
    def pairwise(self, A, B=None) -> np.ndarray:
        """Distance matrix between point arrays ``A`` (n) and ``B`` (m)."""
        A = self.as_points(A)
        B = A if B is None else self.as_points(B)
        return self._pairwise(A, B)

    def _pairwise(self, A, B):
        raise NotImplementedError

    def distance(self, x, y) -> float:
        return float(self.pairwise(self.as_point(x)[None], self.as_point(y)[None])[0, 0])

    def lp_pairs(self, points, dmat):
        """Index pairs ``(i, j)``, ``i < j``, whose Lipschitz constraint is not implied.

        A constraint ``|f_i - f_j| <= d_ij`` is redundant if ``d_ij >= 2`` (the
        box ``|f| <= 1`` already enforces it) or if some ``k`` lies on a
        geodesic between ``i`` and ``j``.
        """
        n = dmat.shape[0]
        iu, ju = np.triu_indices(n, k=1)
        keep = dmat[iu, ju] < 2.0
        iu, ju = iu[keep], ju[keep]
        if n <= _PRUNE_LIMIT and iu.size:
            d = dmat[iu, ju]
            via = dmat[iu, :] + dmat[:, ju].T
            via[np.arange(iu.size), iu] = np.inf
            via[np.arange(iu.size), ju] = np.inf
            implied = via.min(axis=1) <= d * (1.0 + 1e-14)
            iu, ju = iu[~implied], ju[~implied]
        return iu, ju

    # -- text form ------------------------------------------------------------
    def format_point(self, x) -> str:
        raise NotImplementedError

    def parse_point(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng, n, box=None) -> np.ndarray:
        """Draw ``n`` points; ``box`` restricts coordinates where meaningful."""
        raise NotImplementedError

    # -- identity -------------------------------------------------------------
    def _key(self):
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, MetricSpace) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"{type(self).__name__}{self._key()[1:]}"

    def empty_points(self):
        return np.zeros((0,) + self.point_shape, dtype=float)


def _readonly(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _fmt(v) -> str:
    return format(float(v), ".17g")


class EuclideanSpace(MetricSpace):
    kind = "euclidean"

    def __init__(self, dim: int = 1):
        if int(dim) < 1:
            raise InvalidArgumentError("dimension must be >= 1")
        self.dim = int(dim)
        self.point_shape = (self.dim,)

    def as_points(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 0:
            X = X.reshape(1, 1)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if self.dim == 1 else X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise InvalidArgumentError(
                f"points of {self.dim}-d euclidean space must have shape (n, {self.dim}), got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InvalidArgumentError("euclidean coordinates must be finite")
        return _readonly(X)

    def _pairwise(self, A, B):
        diff = A[:, None, :] - B[None, :, :]
        if self.dim == 1:
            return np.abs(diff[..., 0])
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def lp_pairs(self, points, dmat):
        if self.dim != 1:
            return super().lp_pairs(points, dmat)
        order = np.argsort(points[:, 0], kind="stable")
        i, j = order[:-1], order[1:]
        keep = dmat[i, j] < 2.0
        lo, hi = np.minimum(i, j)[keep], np.maximum(i, j)[keep]
        return lo, hi

    def format_point(self, x):
        return ",".join(_fmt(v) for v in np.ravel(x))

    def parse_point(self, text):
        return self.as_point([float(v) for v in text.split(",")])

    def sample(self, rng, n, box=None):
        lo, hi = box if box is not None else (-1.0, 1.0)
        return _readonly(rng.uniform(lo, hi, size=(n, self.dim)))

    def _key(self):
        return ("euclidean", self.dim)


class CircleSpace(MetricSpace):
    """Circle of circumference ``C``; points are angles in ``[0, C)``."""

    kind = "circle"
    point_shape = ()

    def __init__(self, circumference: float = 2 * math.pi):
        if not circumference > 0:
            raise InvalidArgumentError("circumference must be positive")
        self.circumference = float(circumference)

    def wrap(self, theta):
        c = self.circumference
        out = np.mod(np.asarray(theta, dtype=float), c)
        return np.where(out >= c, 0.0, out)

    def as_points(self, X):
        X = np.asarray(X, dtype=float).reshape(-1)
        if not np.all(np.isfinite(X)):
            raise InvalidArgumentError("angles must be finite")
        return _readonly(self.wrap(X))

    def as_point(self, x):
        return self.as_points(np.reshape(x, -1))[0]

    def _pairwise(self, A, B):
        delta = np.abs(A[:, None] - B[None, :])
        return np.minimum(delta, self.circumference - delta)

    def lp_pairs(self, points, dmat):
        n = points.shape[0]
        if n < 2:
            return np.zeros(0, int), np.zeros(0, int)
        order = np.argsort(points, kind="stable")
        i = order
        j = np.roll(order, -1)
        if n == 2:
            i, j = i[:1], j[:1]
        keep = dmat[i, j] < 2.0
        return np.minimum(i, j)[keep], np.maximum(i, j)[keep]

    def format_point(self, x):
        return _fmt(x)

    def parse_point(self, text):
        return self.as_point(float(text))

    def sample(self, rng, n, box=None):
        lo, hi = box if box is not None else (0.0, self.circumference)
        return self.as_points(rng.uniform(lo, hi, size=n))

    def _key(self):
        return ("circle", self.circumference)


class DiscreteSpace(MetricSpace):
    """``n_points`` labelled states, pairwise distance ``scale``."""

    kind = "discrete"
    point_shape = ()

    def __init__(self, n_points: int, scale: float = 1.0, labels=None):
        if int(n_points) < 1:
            raise InvalidArgumentError("discrete space needs at least one point")
        if not scale > 0:
            raise InvalidArgumentError("discrete scale must be positive")
        self.n_points = int(n_points)
        self.scale = float(scale)
        labels = [str(i) for i in range(self.n_points)] if labels is None else [str(s) for s in labels]
        if len(labels) != self.n_points or len(set(labels)) != self.n_points:
            raise InvalidArgumentError("labels must be unique and match n_points")
        self.labels = tuple(labels)
        self._index = {s: i for i, s in enumerate(self.labels)}

    def index(self, label) -> int:
        if isinstance(label, str):
            if label not in self._index:
                raise InvalidArgumentError(f"unknown discrete label {label!r}")
            return self._index[label]
        return int(label)

    def as_points(self, X):
        if isinstance(X, str):
            X = [X]
        if isinstance(X, (list, tuple)):
            X = [self.index(v) for v in X]
        X = np.asarray(X, dtype=float).reshape(-1)
        if np.any(X != np.round(X)) or np.any(X < 0) or np.any(X >= self.n_points):
            raise InvalidArgumentError(f"discrete points must be integers in [0, {self.n_points})")
        return _readonly(X)

    def as_point(self, x):
        return self.as_points([x] if not isinstance(x, np.ndarray) else x.reshape(-1))[0]

    def _pairwise(self, A, B):
        return np.where(A[:, None] == B[None, :], 0.0, self.scale)

    def format_point(self, x):
        return self.labels[int(x)]

    def parse_point(self, text):
        return self.as_point(text)

    def sample(self, rng, n, box=None):
        return self.as_points(rng.integers(0, self.n_points, size=n))

    def _key(self):
        return ("discrete", self.n_points, self.scale, self.labels)


class GraphSpace(MetricSpace):
    """Metric graph built from weighted undirected edges.

    Points are ``(edge_index, offset)`` rows with ``0 <= offset <= length``;
    offset 0 is the edge's first endpoint (its *tail*). Vertices are stored in
    a canonical representation so equal points compare equal row-wise.
    """

    kind = "graph"
    point_shape = (2,)

    def __init__(self, n_vertices: int, edges):
        n = int(n_vertices)
        edges = [(int(i), int(j), float(w)) for i, j, w in edges]
        if n < 1 or not edges:
            raise ConfigurationError("graph needs at least one vertex and one edge")
        for i, j, w in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ConfigurationError(f"edge ({i}, {j}) references a missing vertex")
            if not w > 0 or not math.isfinite(w):
                raise ConfigurationError(f"edge ({i}, {j}) must have positive finite length")
            if i == j:
                raise ConfigurationError("self-loops are not supported")
        self.n_vertices = n
        self.edges = tuple(edges)
        self.tails = np.array([e[0] for e in edges], dtype=int)
        self.heads = np.array([e[1] for e in edges], dtype=int)
        self.lengths = _readonly([e[2] for e in edges])
        self.tails.setflags(write=False)
        self.heads.setflags(write=False)

        adj = np.full((n, n), np.inf)
        np.fill_diagonal(adj, 0.0)
        for i, j, w in edges:
            adj[i, j] = adj[j, i] = min(adj[i, j], w)
        ncomp, _ = connected_components(np.where(np.isfinite(adj), 1, 0), directed=False)
        if ncomp != 1:
            raise ConfigurationError("graph is disconnected; distance would be infinite")
        dist = shortest_path(np.where(np.isfinite(adj), adj, 0.0), method="D", directed=False)
        self.vertex_distances = _readonly(np.minimum(dist, dist.T))

        rep = {}
        for e, (i, j, w) in enumerate(edges):
            rep.setdefault(i, (e, 0.0))
            rep.setdefault(j, (e, w))
        self._vertex_rep = rep
        self.degree = np.bincount(np.concatenate([self.tails, self.heads]), minlength=n)

    def vertex_point(self, v) -> np.ndarray:
        e, off = self._vertex_rep[int(v)]
        return _readonly([e, off])

    def point(self, edge, offset) -> np.ndarray:
        return self.as_point([edge, offset])

    def as_points(self, X):
        X = np.array(X, dtype=float, copy=True)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != 2:
            raise InvalidArgumentError("graph points must be (edge, offset) pairs")
        e = X[:, 0]
        if np.any(e != np.round(e)) or np.any(e < 0) or np.any(e >= len(self.edges)):
            raise InvalidArgumentError("graph point references a missing edge")
        ei = e.astype(int)
        L = self.lengths[ei]
        off = X[:, 1]
        if np.any(off < 0) or np.any(off > L) or not np.all(np.isfinite(off)):
            raise InvalidArgumentError("graph point offset must lie in [0, edge length]")
        for r in np.flatnonzero((off == 0) | (off == L)):
            v = self.tails[ei[r]] if off[r] == 0 else self.heads[ei[r]]
            X[r] = self._vertex_rep[int(v)]
        return _readonly(X)

    def _pairwise(self, A, B):
        ea, sa = A[:, 0].astype(int), A[:, 1]
        eb, sb = B[:, 0].astype(int), B[:, 1]
        D = self.vertex_distances
        ta, ha, ra = self.tails[ea], self.heads[ea], self.lengths[ea] - sa
        tb, hb, rb = self.tails[eb], self.heads[eb], self.lengths[eb] - sb
        # add the two edge legs first so d(x, y) == d(y, x) bit for bit
        best = D[np.ix_(ta, tb)] + (sa[:, None] + sb[None, :])
        best = np.minimum(best, D[np.ix_(ta, hb)] + (sa[:, None] + rb[None, :]))
        best = np.minimum(best, D[np.ix_(ha, tb)] + (ra[:, None] + sb[None, :]))
        best = np.minimum(best, D[np.ix_(ha, hb)] + (ra[:, None] + rb[None, :]))
        same = ea[:, None] == eb[None, :]
        return np.where(same, np.minimum(best, np.abs(sa[:, None] - sb[None, :])), best)

    def format_point(self, x):
        return f"{int(x[0])}:{_fmt(x[1])}"

    def parse_point(self, text):
        e, off = text.split(":")
        return self.as_point([int(e), float(off)])

    def sample(self, rng, n, box=None):
        e = rng.integers(0, len(self.edges), size=n)
        off = rng.uniform(0.0, 1.0, size=n) * self.lengths[e]
        return self.as_points(np.column_stack([e, off]))

    def _key(self):
        return ("graph", self.n_vertices, self.edges)


class TrajectorySpace(MetricSpace):
    """Trajectories sampled on ``grid`` with values in ``target``.

    The distance is the maximum over grid points of target distances, so it
    never exceeds the sup-norm distance of the underlying continuous paths.
    """

    kind = "trajectory"

    def __init__(self, grid, target: MetricSpace):
        grid = np.asarray(grid, dtype=float).reshape(-1)
        if grid.size == 0:
            raise InvalidArgumentError("trajectory grid must not be empty")
        if np.any(np.diff(grid) <= 0):
            raise InvalidArgumentError("trajectory grid must be strictly increasing")
        if not isinstance(target, (EuclideanSpace, DiscreteSpace)):
            raise InvalidArgumentError("trajectory target must be euclidean or discrete")
        self.grid = _readonly(grid)
        self.target = target
        if isinstance(target, EuclideanSpace) and target.dim > 1:
            self.point_shape = (grid.size, target.dim)
        else:
            self.point_shape = (grid.size,)

    def as_points(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == len(self.point_shape):
            X = X[None, ...]
        if X.shape[1:] != self.point_shape:
            raise InvalidArgumentError(
                f"trajectory points must have shape (n, {self.point_shape}), got {X.shape}")
        if isinstance(self.target, DiscreteSpace):
            self.target.as_points(X.reshape(-1))
        elif not np.all(np.isfinite(X)):
            raise InvalidArgumentError("trajectory samples must be finite")
        return _readonly(X)

    def _pairwise(self, A, B):
        if isinstance(self.target, DiscreteSpace):
            differ = np.any(A[:, None, :] != B[None, :, :], axis=2)
            return np.where(differ, self.target.scale, 0.0)
        diff = A[:, None, ...] - B[None, :, ...]
        if len(self.point_shape) == 1:
            return np.max(np.abs(diff), axis=2)
        return np.max(np.sqrt(np.sum(diff * diff, axis=3)), axis=2)

    def format_point(self, x):
        x = np.asarray(x)
        if isinstance(self.target, DiscreteSpace):
            return ";".join(self.target.format_point(v) for v in x)
        if x.ndim == 1:
            return ";".join(_fmt(v) for v in x)
        return ";".join(",".join(_fmt(v) for v in row) for row in x)

    def parse_point(self, text):
        parts = text.split(";")
        if isinstance(self.target, DiscreteSpace):
            return self.as_point(np.array([self.target.index(p) for p in parts], dtype=float))
        return self.as_point(np.array([[float(v) for v in p.split(",")] for p in parts]).reshape(self.point_shape))

    def sample(self, rng, n, box=None):
        if isinstance(self.target, DiscreteSpace):
            return self.as_points(rng.integers(0, self.target.n_points, size=(n,) + self.point_shape))
        lo, hi = box if box is not None else (-1.0, 1.0)
        return self.as_points(rng.uniform(lo, hi, size=(n,) + self.point_shape))

    def _key(self):
        return ("trajectory", tuple(self.grid.tolist()), self.target._key())


def distance(space: MetricSpace, x, y) -> float:
    """Distance between two points of ``space``."""
    return space.distance(x, y)


def build_graph_space(n_vertices, edges) -> GraphSpace:
    return GraphSpace(n_vertices, edges)


def build_trajectory_space(grid, target) -> TrajectorySpace:
    return TrajectorySpace(grid, target)
