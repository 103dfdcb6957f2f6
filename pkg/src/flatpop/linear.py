"""Representation-formula solution operator and its fixed-point iteration.

The operator is evaluated with a cohort scheme on a uniform grid. The state
is a list of atoms (location, weight, origin tag) that is advanced step by
step: weights are multiplied by ``exp(c dt)`` (left-endpoint rule), new atoms
are born from the kernel applied to the input path and from the influx, and
everything is moved by the flow. Snapshots are compacted on output only, so
compaction errors do not accumulate in the state.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .exceptions import ConfigurationError, ConvergenceError, InvalidArgumentError
from .flat import bielecki_distance, continuity_moduli
from .measures import AtomicMeasure, MeasurePath, compact, row_groups
from .model import ModelFunctions, apriori_bound, solver_constant

TAGS = ("initial", "eta", "influx")
QUADRATURES = ("left", "trapezoid", "inject_bad")


@dataclass(frozen=True)
class SolverConfig:
    """Time grid, fixed-point and compaction settings.

    ``quadrature`` selects the rule for the growth exponent: ``left`` (the
    default), ``trapezoid``, or ``inject_bad`` which deliberately scales the
    exponent wrong and exists only as a negative control for the verify
    batteries.
    """

    dt: float = 1.0 / 64
    T: float = 1.0
    t0: float = 0.0
    tol: float = 1e-10
    max_iter: int = 100
    lam: float | None = None
    merge_radius: float = 0.0
    weight_floor: float = 0.0
    quadrature: str = "left"
    outer_tol: float = 1e-8
    outer_max_iter: int = 50
    outer_lam: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive", key="solver.dt")
        if not self.T > self.t0:
            raise ConfigurationError("T must exceed the start time", key="solver.T")
        if not self.tol > 0 or not self.outer_tol > 0:
            raise ConfigurationError("tolerances must be positive", key="solver.tol")
        if self.merge_radius < 0 or self.weight_floor < 0:
            raise ConfigurationError("compaction parameters must be nonnegative",
                                     key="solver.merge_radius")
        if self.quadrature not in QUADRATURES:
            raise ConfigurationError(f"unknown quadrature {self.quadrature!r}", key="solver.quadrature")
        if int(self.max_iter) < 1 or int(self.outer_max_iter) < 1:
            raise ConfigurationError("iteration limits must be >= 1", key="solver.max_iter")
        n = (self.T - self.t0) / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ConfigurationError("T - t0 must be a multiple of dt", key="solver.dt")

    @property
    def n_steps(self) -> int:
        return int(round((self.T - self.t0) / self.dt))

    def grid(self) -> np.ndarray:
        g = self.t0 + self.dt * np.arange(self.n_steps + 1)
        g[-1] = self.T
        return g

    def compaction_budget(self, mass: float) -> float:
        return self.merge_radius * mass

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class OperatorResult:
    path: MeasurePath
    dropped: np.ndarray
    parts: dict | None = None


def _merge_exact(P, W, tag):
    """Merge atoms with identical location and tag, keeping first-seen order."""
    if W.size < 2:
        return P, W, tag
    first, inv = row_groups(np.column_stack([tag.astype(float), P.reshape(W.size, -1)]))
    if first.size == W.size:
        return P, W, tag
    return P[first], np.bincount(inv, weights=W, minlength=first.size), tag[first]


def _growth_factor(model, t, t_next, P, P_next, mu, dt, quadrature):
    c = model.growth.rate(t, P, mu)
    if quadrature == "left":
        return np.exp(c * dt)
    if quadrature == "inject_bad":
        return np.exp(c * dt * 0.5)
    c_next = model.growth.rate(t_next, P_next, mu)
    return np.exp(0.5 * (c + c_next) * dt)


def apply_solution_operator(mu0: AtomicMeasure, nu_path: MeasurePath, model: ModelFunctions,
                            cfg: SolverConfig, frozen: MeasurePath | None = None,
                            decompose: bool = False) -> OperatorResult:
    """Evaluate the representation formula with input path ``nu_path``.

    ``frozen`` supplies the measure argument of measure-dependent terms. With
    ``decompose=True`` the uncompacted contributions of the initial datum, the
    kernel and the influx are returned separately in ``parts``.
    """
    space = model.space
    if mu0.space != space or nu_path.space != space:
        raise InvalidArgumentError("measures and model live on different spaces")
    grid = cfg.grid()
    if nu_path.grid.shape != grid.shape or not np.allclose(nu_path.grid, grid, rtol=0, atol=1e-12):
        raise InvalidArgumentError("input path is not on the solver grid")
    if frozen is not None and not frozen.same_grid(nu_path):
        raise InvalidArgumentError("frozen path is not on the solver grid")
    if model.measure_dependent and frozen is None:
        raise InvalidArgumentError("measure-dependent model needs a frozen path")

    P = np.array(mu0.locations)
    W = np.array(mu0.weights)
    tag = np.zeros(W.size, dtype=int)
    snaps, dropped = [], []
    parts = {name: [] for name in TAGS} if decompose else None
    K = grid.size - 1
    for k in range(K + 1):
        t = grid[k]
        P, W, tag = _merge_exact(P, W, tag)
        state = AtomicMeasure._trusted(space, P, W)
        snap, lost = compact(state, cfg.merge_radius, cfg.weight_floor, return_dropped=True)
        snaps.append(snap)
        dropped.append(lost)
        if decompose:
            for i, name in enumerate(TAGS):
                sel = tag == i
                parts[name].append(AtomicMeasure._trusted(space, P[sel], W[sel]))
        if k == K:
            break

        mu_k = frozen.snapshots[k] if frozen is not None else None
        dt = grid[k + 1] - t
        births_P, births_W, births_tag = [], [], []
        nu_k = nu_path.snapshots[k]
        if len(nu_k):
            src, locs, w = model.kernel.emit(t, nu_k.locations, mu_k)
            if len(w):
                births_P.append(space.as_points(locs))
                births_W.append(dt * w * nu_k.weights[src])
                births_tag.append(np.full(len(w), 1))
        N = model.influx.measure(t, mu_k)
        if len(N):
            births_P.append(N.locations)
            births_W.append(dt * N.weights)
            births_tag.append(np.full(len(N), 2))
        if births_P:
            P = np.concatenate([P] + births_P)
            W = np.concatenate([W] + births_W)
            tag = np.concatenate([tag] + births_tag)

        P_next = np.array(model.flow(grid[k + 1], t, P, frozen))
        W = W * _growth_factor(model, t, grid[k + 1], P, P_next, mu_k, dt, cfg.quadrature)
        P = P_next
        if np.any(W < 0) or not np.all(np.isfinite(W)):
            raise ArithmeticError("solution operator left the nonnegative cone")

    result = OperatorResult(MeasurePath(grid, snaps), np.array(dropped))
    if decompose:
        result.parts = {name: MeasurePath(grid, seq) for name, seq in parts.items()}
    return result


@dataclass
class Diagnostics:
    iterations: int = 0
    residuals: list = field(default_factory=list)
    mass_timeline: list = field(default_factory=list)
    compaction_loss: float = 0.0
    compaction_loss_per_step: list = field(default_factory=list)
    apriori_bound_ok: bool = True
    apriori_bound: list = field(default_factory=list)
    solver_constant: float | None = None
    lam: float = 0.0
    continuity_moduli: list = field(default_factory=list)
    outer_residuals: list = field(default_factory=list)
    outer_iterations: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: _jsonable(v) for k, v in sorted(d.items())}


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in sorted(v.items())}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _eta_weights(model, grid):
    return np.array([model.eta_bl(t) for t in grid])


def default_lambda(model, cfg, radius=None):
    """``2 C`` with ``C`` the solver constant; ``(lam, C)``."""
    try:
        C = solver_constant(model, cfg.T, t0=cfg.t0, radius=radius)
    except ConfigurationError:
        if model.kernel.bl_bound() == 0:
            return 0.0, None
        raise
    return 2.0 * C, C


def solve_linear(mu0: AtomicMeasure, model: ModelFunctions, cfg: SolverConfig,
                 frozen: MeasurePath | None = None, initial_path: MeasurePath | None = None,
                 radius: float | None = None):
    """Banach iteration ``nu <- T nu`` from the constant path ``mu0``.

    Stops once the Bielecki distance between successive iterates (weight
    ``f = ||eta||_BL``, ``lam = 2 C`` unless configured) is at most ``cfg.tol``.
    Returns ``(path, Diagnostics)``.
    """
    if model.measure_dependent and frozen is None:
        raise InvalidArgumentError("model depends on the measure; use solve_nonlinear")
    grid = cfg.grid()
    if cfg.lam is None:
        lam, C = default_lambda(model, cfg, radius)
    else:
        lam = float(cfg.lam)
        try:
            C = solver_constant(model, cfg.T, t0=cfg.t0, radius=radius)
        except ConfigurationError:
            C = None
    f = _eta_weights(model, grid)

    path = MeasurePath.constant(grid, mu0) if initial_path is None else initial_path
    residuals = []
    result = None
    for it in range(1, int(cfg.max_iter) + 1):
        result = apply_solution_operator(mu0, path, model, cfg, frozen=frozen)
        r = bielecki_distance(result.path, path, lam, f)
        residuals.append(r)
        path = result.path
        if r <= cfg.tol:
            break
    else:
        raise ConvergenceError(
            f"linear fixed point did not reach tol {cfg.tol:g} in {cfg.max_iter} iterations "
            f"(last residual {residuals[-1]:.3e})", residuals)

    masses = path.masses()
    bound = apriori_bound(model, mu0.mass, grid) if frozen is None else None
    ok = True if bound is None else bool(np.all(masses <= bound * (1 + 1e-9) + 1e-12))
    diag = Diagnostics(
        iterations=it,
        residuals=residuals,
        mass_timeline=masses.tolist(),
        compaction_loss=float(np.sum(result.dropped)),
        compaction_loss_per_step=result.dropped.tolist(),
        apriori_bound_ok=ok,
        apriori_bound=[] if bound is None else bound.tolist(),
        solver_constant=C,
        lam=lam,
        continuity_moduli=continuity_moduli(path).tolist() if len(path) < 2000 else [],
    )
    return path, diag


def continuity_bound(model: ModelFunctions, cfg: SolverConfig) -> float:
    """``C exp(C int ||eta||_BL)``: amplification of initial-data perturbations."""
    C = solver_constant(model, cfg.T, t0=cfg.t0)
    grid = cfg.grid()
    f = _eta_weights(model, grid)
    return C * math.exp(C * float(np.sum(f[:-1] * np.diff(grid))))
