"""Model terms ``(c, eta, N, X)`` with their declared bounds.

Every term can optionally depend on the current measure ``mu``; solvers pass
the snapshot of a frozen path (or ``None`` for measure-independent terms).
Declared constants are trusted inputs; :func:`validate_assumptions` spot
checks them by sampling.

Growth      ``rate(t, X, mu) -> (n,)``
Kernel      ``emit(t, X, mu) -> (src, locations, weights)``, i.e. the atoms of
            ``eta(t, X[i], mu)`` tagged with their source index ``i``
Influx      ``measure(t, mu) -> AtomicMeasure``
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .exceptions import ConfigurationError, InvalidArgumentError, UnsupportedBackendError
from .flat import flat_distance
from .flows import FlowMap, IdentityFlow, ODEFlow, empirical_lipschitz
from .measures import AtomicMeasure
from .spaces import DiscreteSpace, MetricSpace


# -- growth -------------------------------------------------------------------------


class GrowthTerm:
    """Per-capita rate ``c(t, x, mu)``.

    ``sup_bound(t, radius)`` bounds ``|c|`` over all measures of mass at most
    ``radius``; ``upper_bound(t)`` bounds ``c`` from above over all measures,
    which is what the a-priori mass estimate needs.
    """

    measure_dependent = False
    lip = 0.0
    measure_lip = 0.0

    def rate(self, t, X, mu=None) -> np.ndarray:
        raise NotImplementedError

    def sup_bound(self, t=0.0, radius=None) -> float:
        raise NotImplementedError

    def lip_bound(self, t=0.0) -> float:
        return self.lip

    def upper_bound(self, t=0.0) -> float:
        return self.sup_bound(t)


class ConstantGrowth(GrowthTerm):
    def __init__(self, c0: float = 0.0):
        self.c0 = float(c0)

    def rate(self, t, X, mu=None):
        return np.full(len(X), self.c0)

    def sup_bound(self, t=0.0, radius=None):
        return abs(self.c0)

    def upper_bound(self, t=0.0):
        return self.c0


class LogisticGrowth(GrowthTerm):
    """``c = r (1 - mu(S) / K)``; Lipschitz in the measure with constant ``|r| / K``."""

    measure_dependent = True

    def __init__(self, r: float, K: float):
        if not K > 0:
            raise ConfigurationError("carrying capacity must be positive", key="K")
        self.r, self.K = float(r), float(K)
        self.measure_lip = abs(self.r) / self.K

    def rate(self, t, X, mu=None):
        m = 0.0 if mu is None else mu.mass
        return np.full(len(X), self.r * (1.0 - m / self.K))

    def sup_bound(self, t=0.0, radius=None):
        if radius is None:
            return math.inf
        return abs(self.r) * max(1.0, abs(radius / self.K - 1.0))

    def upper_bound(self, t=0.0):
        return self.r if self.r >= 0 else math.inf


class FunctionGrowth(GrowthTerm):
    """User rate ``fn(t, X, mu) -> (n,)`` with declared constants."""

    def __init__(self, fn, sup, lip, measure_lip=0.0, measure_dependent=False):
        self.fn = fn
        self.sup = float(sup)
        self.lip = float(lip)
        self.measure_lip = float(measure_lip)
        self.measure_dependent = bool(measure_dependent)

    def rate(self, t, X, mu=None):
        return np.asarray(self.fn(t, X, mu), dtype=float).reshape(len(X))

    def sup_bound(self, t=0.0, radius=None):
        return self.sup


# -- heterogeneity kernels ------------------------------------------------------


class Kernel:
    """Measure-valued ``eta(t, x, mu)``.

    ``mass_bound`` bounds ``eta(t, x, mu)(S)`` and ``lip`` bounds
    ``rho_F(eta(t, x1), eta(t, x2)) / d(x1, x2)``, so ``bl_bound`` is the
    ``BL(S; M^+)`` norm that drives the fixed-point weight.
    """

    measure_dependent = False
    mass_bound = 0.0
    lip = 0.0
    measure_lip = 0.0

    def emit(self, t, X, mu=None):
        raise NotImplementedError

    def bl_bound(self, t=0.0) -> float:
        return max(self.mass_bound, self.lip)

    def at(self, t, x, mu=None) -> AtomicMeasure:
        """``eta(t, x, mu)`` for a single point, as a measure."""
        X = self.space.as_point(x)[None, ...]
        _, locs, w = self.emit(t, X, mu)
        return AtomicMeasure(self.space, locs, w)


class ZeroKernel(Kernel):
    def __init__(self, space: MetricSpace):
        self.space = space

    def emit(self, t, X, mu=None):
        return np.zeros(0, dtype=int), self.space.empty_points(), np.zeros(0)


class PointMutationKernel(Kernel):
    """``eta(t, x) = m * delta_{J(x)}`` for a jump map ``J`` acting on point arrays."""

    def __init__(self, space: MetricSpace, rate: float, jump, jump_lip: float):
        if not rate >= 0:
            raise ConfigurationError("mutation rate must be nonnegative", key="rate")
        self.space = space
        self.rate = float(rate)
        self.jump = jump
        self.jump_lip = float(jump_lip)
        self.mass_bound = self.rate
        self.lip = self.rate * self.jump_lip

    def emit(self, t, X, mu=None):
        n = len(X)
        if n == 0 or self.rate == 0:
            return np.zeros(0, dtype=int), self.space.empty_points(), np.zeros(0)
        return np.arange(n), self.space.as_points(self.jump(X)), np.full(n, self.rate)


class TransitionKernel(Kernel):
    """Jumps between the states of a discrete space at rates ``rates[i, j]``."""

    def __init__(self, space: DiscreteSpace, rates):
        if not isinstance(space, DiscreteSpace):
            raise UnsupportedBackendError("transition kernels need a discrete space")
        rates = np.asarray(rates, dtype=float)
        if rates.shape != (space.n_points, space.n_points) or np.any(rates < 0):
            raise ConfigurationError("rates must be a nonnegative n x n matrix", key="rates")
        self.space = space
        self.rates = rates
        self.mass_bound = float(np.max(rates.sum(axis=1)))
        n = space.n_points
        states = np.arange(n, dtype=float)
        rows = [AtomicMeasure(space, states, rates[i]) for i in range(n)]
        self.lip = max((flat_distance(rows[i], rows[j]) / space.scale
                        for i in range(n) for j in range(i + 1, n)), default=0.0)

    def emit(self, t, X, mu=None):
        idx = np.asarray(X, dtype=int)
        src, dst = np.nonzero(self.rates[idx] > 0)
        return src, dst.astype(float), self.rates[idx[src], dst]


class FunctionKernel(Kernel):
    """User kernel ``fn(t, x, mu) -> AtomicMeasure`` applied point by point."""

    def __init__(self, space, fn, mass_bound, lip, measure_lip=0.0, measure_dependent=False):
        self.space = space
        self.fn = fn
        self.mass_bound = float(mass_bound)
        self.lip = float(lip)
        self.measure_lip = float(measure_lip)
        self.measure_dependent = bool(measure_dependent)

    def emit(self, t, X, mu=None):
        src, locs, w = [], [], []
        for i, x in enumerate(X):
            m = self.fn(t, x, mu)
            src.append(np.full(len(m), i))
            locs.append(m.locations)
            w.append(m.weights)
        if not src:
            return np.zeros(0, dtype=int), self.space.empty_points(), np.zeros(0)
        return np.concatenate(src), np.concatenate(locs), np.concatenate(w)


# -- influx -----------------------------------------------------------------------


class Influx:
    measure_dependent = False
    mass_bound = 0.0
    measure_lip = 0.0

    def measure(self, t, mu=None) -> AtomicMeasure:
        raise NotImplementedError


class ZeroInflux(Influx):
    def __init__(self, space):
        self.space = space

    def measure(self, t, mu=None):
        return AtomicMeasure.zero(self.space)


class ConstantInflux(Influx):
    """``N(t) = rate * delta_source``."""

    def __init__(self, space, source, rate: float = 1.0):
        if not rate >= 0:
            raise ConfigurationError("influx rate must be nonnegative", key="rate")
        self.space = space
        self.rate = float(rate)
        self._measure = AtomicMeasure.dirac(space, source, self.rate)
        self.mass_bound = self.rate

    def measure(self, t, mu=None):
        return self._measure


class FunctionInflux(Influx):
    def __init__(self, space, fn, mass_bound, measure_lip=0.0, measure_dependent=False):
        self.space = space
        self.fn = fn
        self.mass_bound = float(mass_bound)
        self.measure_lip = float(measure_lip)
        self.measure_dependent = bool(measure_dependent)

    def measure(self, t, mu=None):
        return self.fn(t, mu)


# -- the tuple ----------------------------------------------------------------------


@dataclass
class ModelFunctions:
    space: MetricSpace
    growth: GrowthTerm = None
    kernel: Kernel = None
    influx: Influx = None
    flow: FlowMap = None

    def __post_init__(self):
        self.growth = ConstantGrowth(0.0) if self.growth is None else self.growth
        self.kernel = ZeroKernel(self.space) if self.kernel is None else self.kernel
        self.influx = ZeroInflux(self.space) if self.influx is None else self.influx
        self.flow = IdentityFlow(self.space) if self.flow is None else self.flow
        for name in ("kernel", "influx", "flow"):
            sp = getattr(getattr(self, name), "space", self.space)
            if sp != self.space:
                raise ConfigurationError(f"{name} lives on a different space", key=name)

    @property
    def measure_dependent(self) -> bool:
        return any(getattr(part, "measure_dependent", False)
                   for part in (self.growth, self.kernel, self.influx, self.flow))

    def velocity(self, t, X, mu=None):
        """Vector field ``b`` behind the flow, on euclidean spaces."""
        if isinstance(self.flow, ODEFlow):
            return self.flow.field(t, X, mu)
        if isinstance(self.flow, IdentityFlow):
            return np.zeros_like(np.asarray(X, dtype=float))
        raise UnsupportedBackendError("the flow of this model is not generated by a vector field")

    def eta_bl(self, t=0.0) -> float:
        return self.kernel.bl_bound(t)

    def measure_lip_rate(self, horizon: float) -> float:
        """``L_R = L_{R,eta} + L_{R,N} + L_{R,c} + L_{R,X}`` (constant in time)."""
        flow_rate = self.flow.measure_lip_integral(0.0, horizon) / horizon if horizon > 0 else 0.0
        return self.kernel.measure_lip + self.influx.measure_lip + self.growth.measure_lip + flow_rate


# -- assumption checks --------------------------------------------------------------


@dataclass
class ValidationReport:
    ratios: dict = field(default_factory=dict)
    observed: dict = field(default_factory=dict)
    declared: dict = field(default_factory=dict)
    tolerance: float = 1e-6

    @property
    def valid(self) -> bool:
        return all(r <= 1.0 + self.tolerance for r in self.ratios.values())

    def add(self, name, observed, declared):
        observed = float(observed)
        declared = float(declared)
        if observed <= 0:
            ratio = 0.0
        elif declared <= 0:
            ratio = math.inf
        else:
            ratio = observed / declared
        self.observed[name] = observed
        self.declared[name] = declared
        self.ratios[name] = ratio

    def to_dict(self):
        return {"declared": self.declared, "observed": self.observed,
                "ratios": self.ratios, "valid": self.valid}


def _random_measure(space, rng, radius, box, n_atoms=3):
    w = rng.uniform(0.0, 1.0, n_atoms)
    w *= rng.uniform(0.0, radius) / max(w.sum(), 1e-300)
    return AtomicMeasure(space, space.sample(rng, n_atoms, box), w)


def validate_assumptions(model: ModelFunctions, n_samples: int = 128, seed: int = 42,
                         T: float = 1.0, box=None, radius: float = 1.0) -> ValidationReport:
    """Sample model terms and compare against their declared bounds.

    Points are drawn with ``space.sample(rng, n, box)``, times from ``[0, T]``
    and, for measure-dependent terms, measures of mass at most ``radius``.
    A ratio above ``1 + 1e-6`` marks the model invalid.
    """
    rng = np.random.default_rng(seed)
    sp = model.space
    rep = ValidationReport()
    X1 = sp.sample(rng, n_samples, box)
    X2 = sp.sample(rng, n_samples, box)
    ts = rng.uniform(0.0, T, n_samples)
    d12 = np.diagonal(sp._pairwise(X1, X2))
    ok = d12 > 0
    needs_mu = model.measure_dependent
    mus = [_random_measure(sp, rng, radius, box) if needs_mu else None for _ in range(4)]

    g = model.growth
    c1 = np.concatenate([g.rate(t, X1[i:i + 1], mus[i % 4]) for i, t in enumerate(ts)])
    c2 = np.concatenate([g.rate(t, X2[i:i + 1], mus[i % 4]) for i, t in enumerate(ts)])
    rep.add("growth.sup", np.max(np.abs(np.concatenate([c1, c2]))),
            max(g.sup_bound(t, radius if needs_mu else None) for t in ts))
    rep.add("growth.lip", np.max(np.abs(c1 - c2)[ok] / d12[ok], initial=0.0),
            max(g.lip_bound(t) for t in ts))
    if g.measure_dependent:
        worst = 0.0
        for i in range(min(n_samples, 16)):
            a, b = _random_measure(sp, rng, radius, box), _random_measure(sp, rng, radius, box)
            rho = flat_distance(a, b)
            if rho > 0:
                diff = np.abs(g.rate(ts[i], X1[i:i + 1], a) - g.rate(ts[i], X1[i:i + 1], b))[0]
                worst = max(worst, diff / rho)
        rep.add("growth.measure_lip", worst, g.measure_lip)

    k = model.kernel
    masses, lips = [], []
    for i in range(min(n_samples, 32)):
        e1 = k.at(ts[i], X1[i], mus[i % 4])
        e2 = k.at(ts[i], X2[i], mus[i % 4])
        masses += [e1.mass, e2.mass]
        if ok[i]:
            lips.append(flat_distance(e1, e2) / d12[i])
    rep.add("kernel.mass", max(masses, default=0.0), k.mass_bound)
    rep.add("kernel.lip", max(lips, default=0.0), k.lip)

    nmass = [model.influx.measure(t, mus[i % 4]).mass for i, t in enumerate(ts[:32])]
    rep.add("influx.mass", max(nmass, default=0.0), model.influx.mass_bound)

    fl = model.flow
    path = None
    if fl.measure_dependent:
        from .measures import MeasurePath
        path = MeasurePath.constant(np.linspace(0.0, T, 5), mus[0])
    worst = 0.0
    for _ in range(4):
        tau, t = np.sort(rng.uniform(0.0, T, 2))
        if t > tau and np.any(ok):
            r = empirical_lipschitz(fl, t, tau, X1[ok], X2[ok], path)
            worst = max(worst, r / fl.lipschitz_bound(t - tau))
    # observed is already relative to the declared L_X(t - tau)
    rep.add("flow.lip", worst, 1.0)
    return rep


def check_model(model, **kwargs) -> ValidationReport:
    """Validate and raise when a sampled value exceeds its declared bound."""
    from .exceptions import ModelValidationError
    rep = validate_assumptions(model, **kwargs)
    if not rep.valid:
        bad = sorted(k for k, r in rep.ratios.items() if r > 1 + rep.tolerance)
        raise ModelValidationError(f"declared bounds violated: {', '.join(bad)}", report=rep)
    return rep


# -- constants ----------------------------------------------------------------------


def _on_grid(fn, ts):
    return np.array([float(fn(t)) for t in ts])


def solver_constant(model: ModelFunctions, T: float, t0: float = 0.0, radius=None, n: int = 257) -> float:
    """``sup_{t0 <= tau <= t <= T} e^{int ||c||} [L_X(t - tau) + int_tau^t Lip(c) L_X(s - tau) ds]``.

    Bounds are integrated with the trapezoidal rule on ``n`` nodes; for
    time-independent bounds the result is exact up to the ``L_X`` quadrature.
    """
    if not T > t0:
        raise InvalidArgumentError("time span must have positive length")
    ts = np.linspace(t0, T, n)
    csup = _on_grid(lambda t: model.growth.sup_bound(t, radius), ts)
    clip = _on_grid(model.growth.lip_bound, ts)
    if not np.all(np.isfinite(csup)) or not np.all(np.isfinite(clip)):
        raise ConfigurationError("growth bounds are not finite on the time span", key="growth")
    expo = math.exp(np.trapezoid(csup, ts))
    dts = ts - t0
    LX = np.array([model.flow.lipschitz_bound(dt) for dt in dts])
    if not np.all(np.isfinite(LX)):
        raise ConfigurationError("the flow has no finite Lipschitz bound on the time span", key="flow")
    best = 0.0
    for i in range(n):
        # integrand on [ts[i], T] with L_X shifted to start at tau = ts[i]
        integrand = clip[i:] * LX[: n - i]
        cum = np.concatenate([[0.0], cumulative_trapezoid(integrand, ts[i:])])
        best = max(best, float(np.max(LX[: n - i] + cum)))
    return expo * best


def apriori_bound(model: ModelFunctions, mass0: float, grid) -> np.ndarray:
    """Discrete Gronwall bound on the mass along ``grid``.

    ``B_{k+1} = e^{c+ dt} ((1 + eta dt) B_k + N dt)`` with ``c+`` the upper
    bound of the growth rate; the scheme's masses never exceed ``B_k``.
    """
    grid = np.asarray(grid, dtype=float)
    B = np.empty(grid.size)
    B[0] = mass0
    for k in range(grid.size - 1):
        t, dt = grid[k], grid[k + 1] - grid[k]
        cu = model.growth.upper_bound(t)
        if not math.isfinite(cu):
            raise ConfigurationError("growth has no finite upper bound", key="growth")
        B[k + 1] = math.exp(cu * dt) * ((1.0 + model.kernel.mass_bound * dt) * B[k]
                                        + model.influx.mass_bound * dt)
    return B


def mass_radius(model: ModelFunctions, mass0: float, grid) -> float:
    """Radius of the mass ball used for measure-Lipschitz constants: twice the a-priori bound."""
    return 2.0 * float(np.max(apriori_bound(model, mass0, grid)))


def nonlinear_constant(model: ModelFunctions, T: float, radius: float, t0: float = 0.0) -> float:
    """Constant ``C_M`` of the freeze-and-iterate contraction on the mass ball ``radius``.

    Perturbing a frozen path moves the linear solution through four channels:
    the kernel and influx (amplified by ``C e^{C int ||eta||}``), the growth
    rate (a weight change bounded by ``R e^{int ||c||}``) and the flow (a
    displacement whose effect on the growth exponent adds ``int Lip(c)``). The
    constant is the largest of these amplification factors.
    """
    C = solver_constant(model, T, t0=t0, radius=radius)
    ts = np.linspace(t0, T, 257)
    eta = np.trapezoid(_on_grid(model.eta_bl, ts), ts)
    csup = np.trapezoid(_on_grid(lambda t: model.growth.sup_bound(t, radius), ts), ts)
    clip = np.trapezoid(_on_grid(model.growth.lip_bound, ts), ts)
    inner = max(C * max(1.0, radius), radius * math.exp(csup) * (1.0 + clip))
    return math.exp(C * eta) * inner
