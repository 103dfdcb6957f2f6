"""Finitely supported nonnegative measures and paths of them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError
from .spaces import MetricSpace


class AtomicMeasure:
    """Finite nonnegative combination of Dirac masses on ``space``.

    Locations are stored as a ``(n, *space.point_shape)`` array and weights as
    an ``(n,)`` array. Both are read-only; every operation returns a new
    measure. Duplicate locations are allowed until :func:`compact` is called.
    """

    __slots__ = ("space", "locations", "weights")

    def __init__(self, space: MetricSpace, locations=None, weights=None):
        if locations is None:
            locations = space.empty_points()
            weights = np.zeros(0)
        locs = space.empty_points() if np.size(locations) == 0 else space.as_points(locations)
        w = np.array(weights, dtype=float, copy=True).reshape(-1)
        if w.shape[0] != locs.shape[0]:
            raise InvalidArgumentError(
                f"got {locs.shape[0]} locations but {w.shape[0]} weights")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidArgumentError("atom weights must be finite and nonnegative")
        w.setflags(write=False)
        self.space = space
        self.locations = locs
        self.weights = w

    @classmethod
    def _trusted(cls, space, locations, weights):
        # skips validation; callers guarantee shapes and nonnegativity
        obj = cls.__new__(cls)
        locations = np.asarray(locations, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if locations.flags.writeable:
            locations = locations.copy()
            locations.setflags(write=False)
        if weights.flags.writeable:
            weights = weights.copy()
            weights.setflags(write=False)
        obj.space = space
        obj.locations = locations
        obj.weights = weights
        return obj

    @classmethod
    def zero(cls, space):
        return cls(space)

    @classmethod
    def dirac(cls, space, x, weight=1.0):
        return cls(space, space.as_point(x)[None, ...], [weight])

    def __len__(self):
        return self.weights.shape[0]

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    tv_norm = mass

    def __iter__(self):
        return iter(zip(self.locations, self.weights))

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, s):
        return scale(self, s)

    __rmul__ = __mul__

    def __repr__(self):
        return f"AtomicMeasure({self.space!r}, atoms={len(self)}, mass={self.mass:.6g})"


def row_groups(rows):
    """Group identical rows of a 2-d array.

    Returns ``(first, inverse)``: the index of each group's first row, with
    groups numbered in order of first appearance, and each row's group.
    """
    rows = np.asarray(rows, dtype=float) + 0.0
    n = rows.shape[0]
    if n == 0:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    order = np.lexsort(rows.T[::-1])
    srt = rows[order]
    new = np.ones(n, dtype=bool)
    new[1:] = np.any(srt[1:] != srt[:-1], axis=1)
    gid_sorted = np.cumsum(new) - 1
    gid = np.empty(n, dtype=int)
    gid[order] = gid_sorted
    # first appearance of each group in the original order
    first = np.full(gid_sorted[-1] + 1, n, dtype=int)
    np.minimum.at(first, gid, np.arange(n))
    rank = np.empty(first.size, dtype=int)
    by_first = np.argsort(first, kind="stable")
    rank[by_first] = np.arange(first.size)
    return first[by_first], rank[gid]


def _check_same_space(mu, nu):
    if mu.space != nu.space:
        raise InvalidArgumentError("measures live on different spaces")


def integrate(mu: AtomicMeasure, psi, pointwise=False) -> float:
    """Sum of ``w_i * psi(x_i)``; ``psi`` maps an array of points to values."""
    if len(mu) == 0:
        return 0.0
    vals = (np.array([psi(x) for x in mu.locations], dtype=float) if pointwise
            else np.asarray(psi(mu.locations), dtype=float).reshape(-1))
    return float(np.dot(mu.weights, vals))


def push_forward(mu: AtomicMeasure, T, space: MetricSpace | None = None, pointwise=False) -> AtomicMeasure:
    """Image measure ``T#mu``; weights are carried over unchanged."""
    target = mu.space if space is None else space
    if len(mu) == 0:
        return AtomicMeasure.zero(target)
    locs = (np.array([T(x) for x in mu.locations]) if pointwise else T(mu.locations))
    return AtomicMeasure(target, locs, mu.weights)


def reweight(mu: AtomicMeasure, g, pointwise=False) -> AtomicMeasure:
    """Multiply each atom's weight by ``g(x_i) >= 0``."""
    if len(mu) == 0:
        return mu
    factors = (np.array([g(x) for x in mu.locations], dtype=float) if pointwise
               else np.asarray(g(mu.locations), dtype=float).reshape(-1))
    if np.any(factors < 0) or not np.all(np.isfinite(factors)):
        raise InvalidArgumentError("reweighting factors must be finite and nonnegative")
    return AtomicMeasure._trusted(mu.space, mu.locations, mu.weights * factors)


def add(mu: AtomicMeasure, nu: AtomicMeasure) -> AtomicMeasure:
    _check_same_space(mu, nu)
    if len(nu) == 0:
        return mu
    if len(mu) == 0:
        return nu
    return AtomicMeasure._trusted(
        mu.space,
        np.concatenate([mu.locations, nu.locations]),
        np.concatenate([mu.weights, nu.weights]))


def add_all(measures, space=None) -> AtomicMeasure:
    measures = list(measures)
    if not measures:
        if space is None:
            raise InvalidArgumentError("add_all of nothing needs an explicit space")
        return AtomicMeasure.zero(space)
    space = measures[0].space if space is None else space
    for m in measures:
        if m.space != space:
            raise InvalidArgumentError("measures live on different spaces")
    return AtomicMeasure._trusted(
        space,
        np.concatenate([m.locations for m in measures]),
        np.concatenate([m.weights for m in measures]))


def scale(mu: AtomicMeasure, s: float) -> AtomicMeasure:
    if not s >= 0:
        raise InvalidArgumentError("scale factor must be nonnegative")
    if s == 0:
        return AtomicMeasure.zero(mu.space)
    return AtomicMeasure._trusted(mu.space, mu.locations, mu.weights * float(s))


def compact(mu: AtomicMeasure, merge_radius: float = 0.0, weight_floor: float = 0.0,
            return_dropped: bool = False):
    """Merge nearby atoms and drop light ones.

    Atoms are visited by decreasing weight (ties keep insertion order). Each
    atom joins the earliest representative within ``merge_radius``, otherwise
    it becomes a representative itself; its mass moves onto the
    representative's location. Clusters lighter than ``weight_floor`` (and
    empty ones) are discarded.

    The flat distance to the input is at most
    ``merge_radius * mu.mass + dropped``.
    """
    if merge_radius < 0 or weight_floor < 0:
        raise InvalidArgumentError("merge_radius and weight_floor must be nonnegative")
    space = mu.space
    if len(mu) == 0:
        return (mu, 0.0) if return_dropped else mu
    order = np.argsort(-mu.weights, kind="stable")
    locs = mu.locations[order]
    w = mu.weights[order]

    if merge_radius == 0:
        reps, labels = row_groups(locs.reshape(len(w), -1))
    else:
        # A new representative claims every later unassigned atom within reach.
        # Earlier representatives have already claimed theirs, so each atom
        # ends up with the earliest representative that covers it.
        labels = np.full(len(w), -1, dtype=int)
        reps = []
        line = locs[:, 0] if locs.ndim == 2 and locs.shape[1] == 1 and space.kind == "euclidean" else None
        if line is not None:
            by_pos = np.argsort(line, kind="stable")
            sorted_pos = line[by_pos]
        i = 0
        n = len(w)
        while i < n:
            labels[i] = len(reps)
            reps.append(i)
            if line is not None:
                lo = np.searchsorted(sorted_pos, line[i] - merge_radius, side="left")
                hi = np.searchsorted(sorted_pos, line[i] + merge_radius, side="right")
                rest = by_pos[lo:hi]
                rest = rest[labels[rest] < 0]
            else:
                rest = np.flatnonzero(labels[i + 1:] < 0) + i + 1
            if rest.size:
                d = (np.abs(line[rest] - line[i]) if line is not None
                     else space._pairwise(locs[i:i + 1], locs[rest])[0])
                labels[rest[d <= merge_radius]] = labels[i]
            while i < n and labels[i] >= 0:
                i += 1
        reps = np.asarray(reps, dtype=int)

    cw = np.bincount(labels, weights=w, minlength=len(reps))
    keep = (cw > 0) & (cw >= weight_floor)
    dropped = float(np.sum(cw[~keep]))
    out = AtomicMeasure._trusted(space, locs[reps[keep]], cw[keep])
    return (out, dropped) if return_dropped else out


@dataclass(frozen=True)
class MeasurePath:
    """Snapshots of a measure-valued map on a strictly increasing time grid."""

    grid: np.ndarray
    snapshots: tuple

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float).reshape(-1)
        if grid.size == 0 or np.any(np.diff(grid) <= 0):
            raise InvalidArgumentError("path grid must be non-empty and strictly increasing")
        snaps = tuple(self.snapshots)
        if len(snaps) != grid.size:
            raise InvalidArgumentError("path needs exactly one snapshot per grid time")
        space = snaps[0].space
        if any(s.space != space for s in snaps):
            raise InvalidArgumentError("path snapshots live on different spaces")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "snapshots", snaps)

    @classmethod
    def constant(cls, grid, mu):
        return cls(grid, tuple(mu for _ in range(len(grid))))

    @property
    def space(self):
        return self.snapshots[0].space

    @property
    def T(self):
        return float(self.grid[-1])

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, k):
        return self.snapshots[k]

    def index_at(self, t) -> int:
        """Grid index of the latest time ``<= t`` (left-constant interpolation)."""
        tol = 1e-12 * max(1.0, abs(self.T))
        k = int(np.searchsorted(self.grid, t + tol, side="right")) - 1
        return min(max(k, 0), len(self.grid) - 1)

    def at(self, t) -> AtomicMeasure:
        return self.snapshots[self.index_at(t)]

    def masses(self) -> np.ndarray:
        return np.array([s.mass for s in self.snapshots])

    def same_grid(self, other) -> bool:
        return self.grid.shape == other.grid.shape and np.allclose(self.grid, other.grid, rtol=0, atol=1e-12)
