"""Two-parameter flows ``X(t, tau, x[, mu])`` acting on point arrays.

A flow moves points from time ``tau`` to time ``t``. Measure-dependent flows
read the frozen path ``mu`` through its left-constant interpolation: on each
grid interval ``[t_k, t_{k+1})`` the snapshot at ``t_k`` is used.

Every flow carries the metadata the solvers need:

``lipschitz_bound(dt)``      bound on the Lipschitz constant of ``X(tau + dt, tau, .)``
``modulus(dt)``              bound on ``d(X(t + dt, tau, x), X(t, tau, x))``
``measure_lip_integral(a, b)`` bound on ``int_a^b L_{R,X}`` so that flows driven by
                             two frozen paths differ by at most this times
                             their sup flat distance
"""
from __future__ import annotations

import math

import numpy as np

from .exceptions import ConfigurationError, InvalidArgumentError, UnsupportedBackendError
from .spaces import CircleSpace, EuclideanSpace, GraphSpace, MetricSpace, TrajectorySpace


def _segments(path, a, b):
    """Split ``[a, b]`` (or ``[b, a]`` when ``b < a``) at the path's grid.

    Yields ``(start, end, snapshot)`` in the direction of travel; the snapshot
    is the one at the left end of the grid interval containing the segment.
    """
    if a == b:
        return
    lo, hi = min(a, b), max(a, b)
    grid = path.grid
    inner = grid[(grid > lo) & (grid < hi)]
    cuts = np.concatenate([[lo], inner, [hi]])
    segs = []
    for s, e in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (s + e)
        segs.append((s, e, path.snapshots[path.index_at(mid)]))
    if b < a:
        segs = [(e, s, snap) for s, e, snap in reversed(segs)]
    yield from segs


class FlowMap:
    """Base class; subclasses implement :meth:`_move`."""

    measure_dependent = False

    def __init__(self, space: MetricSpace):
        self.space = space

    def __call__(self, t, tau, X, path=None):
        X = self.space.as_points(X)
        if t == tau or X.shape[0] == 0:
            return X
        if self.measure_dependent and path is None:
            raise InvalidArgumentError("this flow needs a frozen measure path")
        return self.space.as_points(self._move(float(t), float(tau), X, path))

    def _move(self, t, tau, X, path):
        raise NotImplementedError

    def inverse(self, t, tau, Y, path=None):
        """Preimage of ``Y`` under ``X(t, tau, .)``, which is ``X(tau, t, .)``."""
        return self(tau, t, Y, path)

    def lipschitz_bound(self, dt) -> float:
        return 1.0

    def modulus(self, dt) -> float:
        return 0.0

    def measure_lip_integral(self, a, b) -> float:
        return 0.0


class IdentityFlow(FlowMap):
    def _move(self, t, tau, X, path):
        return X


class RotationFlow(FlowMap):
    """Rigid rotation on the circle with angular speed ``omega``."""

    def __init__(self, space: CircleSpace, omega: float):
        if not isinstance(space, CircleSpace):
            raise UnsupportedBackendError("rotation flow needs a circle space")
        super().__init__(space)
        self.omega = float(omega)

    def _move(self, t, tau, X, path):
        return X + self.omega * (t - tau)

    def modulus(self, dt):
        return abs(self.omega * dt)


class DensityRotationFlow(FlowMap):
    """Rotation whose speed ``omega0 / (1 + mu_t(S))`` slows down in crowds.

    The speed is ``omega0``-Lipschitz in the total mass and hence in the flat
    distance, since ``|mu(S) - nu(S)| <= rho_F(mu, nu)``.
    """

    measure_dependent = True

    def __init__(self, space: CircleSpace, omega0: float):
        if not isinstance(space, CircleSpace):
            raise UnsupportedBackendError("density rotation needs a circle space")
        super().__init__(space)
        self.omega0 = float(omega0)

    def speed(self, mu):
        return self.omega0 / (1.0 + mu.mass)

    def _move(self, t, tau, X, path):
        shift = sum((e - s) * self.speed(snap) for s, e, snap in _segments(path, tau, t))
        return X + shift

    def modulus(self, dt):
        return abs(self.omega0 * dt)

    def measure_lip_integral(self, a, b):
        return abs(self.omega0 * (b - a))


class ShiftFlow(FlowMap):
    """Componentwise translation of trajectory samples at constant velocity."""

    def __init__(self, space: TrajectorySpace, velocity):
        if not isinstance(space, TrajectorySpace) or not isinstance(space.target, EuclideanSpace):
            raise UnsupportedBackendError("shift flow needs a trajectory space with euclidean target")
        super().__init__(space)
        v = np.asarray(velocity, dtype=float)
        self.velocity = np.broadcast_to(v, space.point_shape).copy()

    def _move(self, t, tau, X, path):
        return X + self.velocity * (t - tau)

    def modulus(self, dt):
        v = self.velocity
        speed = np.max(np.abs(v)) if v.ndim == 1 else np.max(np.linalg.norm(v, axis=-1))
        return float(speed * abs(dt))


class GraphDriftFlow(FlowMap):
    """Constant-speed drift along edges, from each edge's tail to its head.

    When a point reaches the head vertex ``v`` it either stops there
    (``policy="absorb"``) or continues on ``routing[v]`` (``policy="route"``).
    Under routing, a head of degree one absorbs, a routing value of ``-1``
    absorbs explicitly, and any other head vertex must be routed onto an edge
    whose tail it is. Backward motion stops at the tail.

    The drift is non-expansive when it is a pure translation along a
    consistently oriented path or cycle that only absorbs at its final vertex;
    otherwise points on both sides of an absorbing vertex can separate and no
    finite Lipschitz bound holds. ``lipschitz`` overrides the inferred value.
    """

    def __init__(self, space: GraphSpace, speed: float = 1.0, policy: str = "absorb",
                 routing=None, lipschitz=None):
        if not isinstance(space, GraphSpace):
            raise UnsupportedBackendError("graph drift needs a graph space")
        if policy not in ("absorb", "route"):
            raise ConfigurationError(f"unknown graph drift policy {policy!r}", key="policy")
        if not speed >= 0:
            raise ConfigurationError("drift speed must be nonnegative", key="speed")
        super().__init__(space)
        self.speed = float(speed)
        self.policy = policy
        routing = {int(k): int(v) for k, v in (routing or {}).items()}
        route = np.full(space.n_vertices, -1, dtype=int)
        if policy == "route":
            for v in sorted(set(space.heads.tolist())):
                if v in routing:
                    e = routing[v]
                    if e >= 0 and (e >= len(space.edges) or space.tails[e] != v):
                        raise ConfigurationError(
                            f"routing at vertex {v} must name an edge leaving it", key=f"routing.{v}")
                    route[v] = e
                elif space.degree[v] > 1:
                    raise ConfigurationError(f"missing routing at vertex {v}", key=f"routing.{v}")
        self.route = route
        indeg = np.bincount(space.heads, minlength=space.n_vertices)
        departure = route.copy()
        for v in range(space.n_vertices):
            outgoing = np.flatnonzero(space.tails == v)
            if indeg[v] == 0 and outgoing.size:
                departure[v] = outgoing[0]
        self._departure = departure
        self._lip = self._infer_lipschitz() if lipschitz is None else float(lipschitz)

    def _infer_lipschitz(self):
        sp = self.space
        n_e = len(sp.edges)
        if n_e == 1 or self.speed == 0:
            return 1.0
        outdeg = np.bincount(sp.tails, minlength=sp.n_vertices)
        indeg = np.bincount(sp.heads, minlength=sp.n_vertices)
        if np.any(outdeg > 1) or np.any(indeg > 1):
            return math.inf
        # every vertex that has both an incoming and an outgoing edge must pass through
        for v in range(sp.n_vertices):
            if indeg[v] == 1 and outdeg[v] == 1:
                out_edge = int(np.flatnonzero(sp.tails == v)[0])
                if self.route[v] != out_edge:
                    return math.inf
        return 1.0

    def _move(self, t, tau, X, path):
        sp = self.space
        E = X[:, 0].astype(int)
        S = X[:, 1].copy()
        dist = self.speed * (t - tau)
        if dist < 0:
            S = np.maximum(S + dist, 0.0)
            return np.column_stack([E, S])
        left = np.full(S.shape, dist)
        # points sitting on a vertex leave along the edge the vertex sends them to
        on_vertex = (S == 0) | (S == sp.lengths[E])
        if np.any(on_vertex):
            idx = np.flatnonzero(on_vertex)
            v = np.where(S[idx] == 0, sp.tails[E[idx]], sp.heads[E[idx]])
            start = self._departure[v]
            stay = start < 0
            left[idx[stay]] = 0.0
            E[idx[~stay]] = start[~stay]
            S[idx[~stay]] = 0.0
        active = left > 0
        while np.any(active):
            idx = np.flatnonzero(active)
            L = sp.lengths[E[idx]]
            room = L - S[idx]
            fits = left[idx] <= room
            S[idx[fits]] += left[idx[fits]]
            left[idx[fits]] = 0.0
            over = idx[~fits]
            left[over] -= room[~fits]
            nxt = self.route[sp.heads[E[over]]]
            stop = nxt < 0
            S[over[stop]] = sp.lengths[E[over[stop]]]
            left[over[stop]] = 0.0
            go = over[~stop]
            E[go] = nxt[~stop]
            S[go] = 0.0
            active = left > 0
        return np.column_stack([E, S])

    def lipschitz_bound(self, dt):
        return self._lip

    def modulus(self, dt):
        return abs(self.speed * dt)


# -- vector fields on R^d ---------------------------------------------------------


class VectorField:
    """Velocity field ``b(t, x, mu)`` on a Euclidean space.

    ``lip`` bounds the Lipschitz constant in ``x``, ``sup`` bounds ``|b|``
    and ``measure_lip`` bounds ``||b(t, ., mu) - b(t, ., nu)||_inf / rho_F(mu, nu)``.
    """

    measure_dependent = False
    lip = 0.0
    sup = math.inf
    measure_lip = 0.0

    def __call__(self, t, X, mu=None) -> np.ndarray:
        raise NotImplementedError


class ConstantField(VectorField):
    def __init__(self, velocity):
        self.velocity = np.atleast_1d(np.asarray(velocity, dtype=float))
        self.sup = float(np.linalg.norm(self.velocity))

    def __call__(self, t, X, mu=None):
        return np.broadcast_to(self.velocity, X.shape).copy()


class LinearField(VectorField):
    """``b(t, x) = A x + v`` with ``A`` a scalar or a matrix."""

    def __init__(self, A=1.0, velocity=0.0, sup=math.inf):
        self.A = np.asarray(A, dtype=float)
        self.velocity = np.atleast_1d(np.asarray(velocity, dtype=float))
        self.lip = float(abs(self.A) if self.A.ndim == 0 else np.linalg.norm(self.A, 2))
        self.sup = float(sup)

    def __call__(self, t, X, mu=None):
        AX = self.A * X if self.A.ndim == 0 else X @ self.A.T
        return AX + self.velocity


class AggregationField(VectorField):
    """Attraction toward the centre of mass, ``b = k (mean(mu) - x)``.

    The measure Lipschitz constant is not finite globally; ``measure_lip``
    should be declared for the mass/support regime at hand.
    """

    measure_dependent = True

    def __init__(self, strength=1.0, measure_lip=math.inf, sup=math.inf):
        self.strength = float(strength)
        self.lip = abs(self.strength)
        self.measure_lip = float(measure_lip)
        self.sup = float(sup)

    def __call__(self, t, X, mu=None):
        if mu is None or mu.mass == 0:
            return np.zeros_like(X)
        mean = mu.weights @ mu.locations / mu.mass
        return self.strength * (mean[None, :] - X)


class FunctionField(VectorField):
    """Wrap a user callable ``fn(t, X, mu) -> (n, d)`` with declared constants."""

    def __init__(self, fn, lip, sup=math.inf, measure_lip=0.0, measure_dependent=False):
        self.fn = fn
        self.lip = float(lip)
        self.sup = float(sup)
        self.measure_lip = float(measure_lip)
        self.measure_dependent = bool(measure_dependent)

    def __call__(self, t, X, mu=None):
        return np.asarray(self.fn(t, X, mu), dtype=float).reshape(X.shape)


class ODEFlow(FlowMap):
    """Flow of ``x' = b(t, x, mu_t)`` integrated with classical RK4.

    The interval ``[tau, t]`` is first split at the frozen path's grid (when
    the field depends on the measure), then each piece is covered by
    ``ceil(length * substeps_per_unit)`` equal steps so the end time is hit
    exactly. The inverse integrates backward with the same scheme.
    """

    def __init__(self, space: EuclideanSpace, field: VectorField, substeps_per_unit: int = 100):
        if not isinstance(space, EuclideanSpace):
            raise UnsupportedBackendError("ODE flows need a euclidean space")
        if int(substeps_per_unit) < 1:
            raise InvalidArgumentError("substeps_per_unit must be >= 1")
        super().__init__(space)
        self.field = field
        self.substeps = int(substeps_per_unit)
        self.measure_dependent = bool(field.measure_dependent)

    def _rk4(self, a, b, X, mu):
        n = max(1, math.ceil(abs(b - a) * self.substeps - 1e-9))
        h = (b - a) / n
        f = self.field
        x = np.array(X, dtype=float)
        for i in range(n):
            s = a + i * h
            k1 = f(s, x, mu)
            k2 = f(s + h / 2, x + (h / 2) * k1, mu)
            k3 = f(s + h / 2, x + (h / 2) * k2, mu)
            k4 = f(s + h, x + h * k3, mu)
            x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        return x

    def _move(self, t, tau, X, path):
        if not self.measure_dependent:
            return self._rk4(tau, t, X, None)
        x = X
        for s, e, snap in _segments(path, tau, t):
            x = self._rk4(s, e, x, snap)
        return x

    def lipschitz_bound(self, dt):
        return math.exp(self.field.lip * abs(dt))

    def modulus(self, dt):
        return self.field.sup * abs(dt)

    def measure_lip_integral(self, a, b):
        # Gronwall: |X_p - X_q| <= int_a^b L_b e^{lip (b - s)} ds * rho
        L, lip, dt = self.field.measure_lip, self.field.lip, abs(b - a)
        if L == 0:
            return 0.0
        return L * (math.expm1(lip * dt) / lip if lip > 0 else dt)


def ode_flow(field: VectorField, space: EuclideanSpace | None = None, substeps_per_unit: int = 100) -> ODEFlow:
    space = EuclideanSpace(np.size(getattr(field, "velocity", [0.0]))) if space is None else space
    return ODEFlow(space, field, substeps_per_unit)


def cocycle_residual(flow: FlowMap, t2, t1, tau, X, path=None) -> float:
    """Largest ``d(X(t2, tau, x), X(t2, t1, X(t1, tau, x)))`` over the samples."""
    X = flow.space.as_points(X)
    direct = flow(t2, tau, X, path)
    composed = flow(t2, t1, flow(t1, tau, X, path), path)
    return float(np.max(np.diagonal(flow.space._pairwise(direct, composed)))) if X.shape[0] else 0.0


def empirical_lipschitz(flow: FlowMap, t, tau, X1, X2, path=None) -> float:
    """Largest ratio ``d(X x1, X x2) / d(x1, x2)`` over sample pairs."""
    sp = flow.space
    X1, X2 = sp.as_points(X1), sp.as_points(X2)
    d0 = np.diagonal(sp._pairwise(X1, X2))
    if np.any(d0 <= 0):
        raise InvalidArgumentError("sample pairs must be at positive distance")
    d1 = np.diagonal(sp._pairwise(flow(t, tau, X1, path), flow(t, tau, X2, path)))
    return float(np.max(d1 / d0))
