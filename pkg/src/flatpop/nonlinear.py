"""Nonlinear model by freezing the measure argument and iterating.

Given a frozen path ``p``, every measure-dependent term is evaluated on
``p`` and the resulting linear problem is solved with :func:`solve_linear`.
Its solution becomes the next frozen path. The outer residual is measured in
the Bielecki metric with weight ``L_R`` (the sum of the measure Lipschitz
rates) and ``lam = 2 C_M``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, ConvergenceError, InvalidArgumentError, ModelValidationError
from .flat import bielecki_distance, flat_distance, snapshot_distances
from .linear import SolverConfig, _jsonable, solve_linear
from .measures import AtomicMeasure, MeasurePath
from .model import ModelFunctions, apriori_bound, mass_radius, nonlinear_constant, solver_constant


def solve_nonlinear(mu0: AtomicMeasure, model: ModelFunctions, cfg: SolverConfig,
                    initial_path: MeasurePath | None = None):
    """Outer fixed point ``p <- solve_linear(model frozen at p)``.

    Starts from the constant path ``mu0`` unless ``initial_path`` is given.
    Every iterate must stay inside the mass ball of radius ``R`` (twice the
    a-priori bound); leaving it raises :class:`ModelValidationError`.
    Returns ``(path, Diagnostics)`` with ``outer_residuals`` filled in.
    """
    grid = cfg.grid()
    horizon = cfg.T - cfg.t0
    R = mass_radius(model, mu0.mass, grid)
    L_R = model.measure_lip_rate(horizon)
    if not math.isfinite(L_R):
        raise ConfigurationError("measure Lipschitz constants must be finite on the mass ball",
                                 key="model")
    C_M = nonlinear_constant(model, cfg.T, R, t0=cfg.t0)
    lam = 2.0 * C_M if cfg.outer_lam is None else float(cfg.outer_lam)

    p = MeasurePath.constant(grid, mu0) if initial_path is None else initial_path
    if not p.same_grid(MeasurePath.constant(grid, mu0)):
        raise InvalidArgumentError("initial path is not on the solver grid")
    outer, sup_res, inner_iters = [], [], []
    diag = None
    for m in range(1, int(cfg.outer_max_iter) + 1):
        path, diag = solve_linear(mu0, model, cfg, frozen=p, initial_path=p, radius=R)
        masses = path.masses()
        if np.any(masses > R * (1 + 1e-9)):
            raise ModelValidationError(
                f"iterate left the a-priori mass ball (max mass {masses.max():.6g} > R = {R:.6g})")
        d = snapshot_distances(path, p)
        outer.append(bielecki_distance(path, p, lam, L_R) if L_R > 0 else float(np.max(d)))
        sup_res.append(float(np.max(d)))
        inner_iters.append(diag.iterations)
        p = path
        if outer[-1] <= cfg.outer_tol:
            break
    else:
        raise ConvergenceError(
            f"outer fixed point did not reach tol {cfg.outer_tol:g} in {cfg.outer_max_iter} "
            f"iterations (last residual {outer[-1]:.3e})", outer)

    diag.outer_residuals = outer
    diag.outer_iterations = m
    diag.apriori_bound = apriori_bound(model, mu0.mass, grid).tolist()
    diag.apriori_bound_ok = bool(np.all(p.masses() <= R))
    diag.extra.update({"radius": R, "measure_lip_rate": L_R, "nonlinear_constant": C_M,
                       "outer_lam": lam, "outer_sup_residuals": sup_res,
                       "inner_iterations": inner_iters})
    return p, diag


def solve(mu0: AtomicMeasure, model: ModelFunctions, cfg: SolverConfig):
    """Dispatch to the linear or nonlinear solver."""
    if model.measure_dependent:
        return solve_nonlinear(mu0, model, cfg)
    return solve_linear(mu0, model, cfg)


# -- stability ------------------------------------------------------------------------


@dataclass
class StabilityReport:
    distances: list
    sup_distance: float
    initial_distance: float
    model_terms: dict
    rhs: float
    constant: float
    bound: float
    ratio: float
    extra: dict = field(default_factory=dict)

    @property
    def within_bound(self) -> bool:
        return self.sup_distance <= self.bound * (1 + 1e-6) + 1e-12

    def to_dict(self):
        d = {k: getattr(self, k) for k in ("bound", "constant", "distances", "initial_distance",
                                           "model_terms", "ratio", "rhs", "sup_distance", "extra")}
        d["within_bound"] = self.within_bound
        return _jsonable(d)


def _model_gap(model_a, model_b, path, R, n_samples, rng):
    """Sampled sup-distances between the model functions along ``path``.

    Returns the time integrals (left rule on the path grid) of
    ``sup_x |c_a - c_b|``, ``sup_x rho_F(eta_a, eta_b)`` and ``rho_F(N_a, N_b)``,
    plus the sampled sup displacement between the two flows over the horizon.
    Growth and kernel gaps act on at most ``R`` units of mass, so they are
    scaled by ``R``.
    """
    sp = model_a.space
    grid = path.grid
    X = sp.sample(rng, n_samples, None)
    support = np.concatenate([s.locations for s in path.snapshots]) if len(path.snapshots) else X
    if len(support):
        pick = rng.choice(len(support), size=min(n_samples, len(support)), replace=False)
        X = np.concatenate([X, support[pick]])
    dts = np.diff(grid)
    g = k = n = 0.0
    for i, t in enumerate(grid[:-1]):
        mu = path.snapshots[i]
        ca = model_a.growth.rate(t, X, mu)
        cb = model_b.growth.rate(t, X, mu)
        g += dts[i] * float(np.max(np.abs(ca - cb)))
        if model_a.kernel is not model_b.kernel:
            worst = 0.0
            for x in X[: min(len(X), 16)]:
                worst = max(worst, flat_distance(model_a.kernel.at(t, x, mu), model_b.kernel.at(t, x, mu)))
            k += dts[i] * worst
        n += dts[i] * flat_distance(model_a.influx.measure(t, mu), model_b.influx.measure(t, mu))
    T, t0 = float(grid[-1]), float(grid[0])
    Xa = model_a.flow(T, t0, X, path)
    Xb = model_b.flow(T, t0, X, path)
    flow = float(np.max(np.diagonal(sp._pairwise(Xa, Xb)))) if len(X) else 0.0
    return {"growth": R * g, "kernel": R * k, "influx": n, "flow": R * flow}


def stability_experiment(model_a: ModelFunctions, model_b: ModelFunctions, mu0: AtomicMeasure,
                         cfg: SolverConfig, mu0_b: AtomicMeasure | None = None,
                         n_samples: int = 64, seed: int = 42) -> StabilityReport:
    """Solve two models and compare the gap with the continuity estimate.

    The right-hand side is ``rho_F(mu0_a, mu0_b)`` plus sampled surrogates of
    the model-function distances (see :func:`_model_gap`); the bound is
    ``C_M`` times it, with ``C_M`` the larger of the two nonlinear constants.
    """
    if model_a.space != model_b.space:
        raise InvalidArgumentError("models live on different spaces")
    mu0_b = mu0 if mu0_b is None else mu0_b
    pa, _ = solve(mu0, model_a, cfg)
    pb, _ = solve(mu0_b, model_b, cfg)
    dist = snapshot_distances(pa, pb)
    grid = cfg.grid()
    R = max(mass_radius(model_a, mu0.mass, grid), mass_radius(model_b, mu0_b.mass, grid))
    C = max(nonlinear_constant(model_a, cfg.T, R, cfg.t0), nonlinear_constant(model_b, cfg.T, R, cfg.t0))
    rng = np.random.default_rng(seed)
    terms = _model_gap(model_a, model_b, pa, R, n_samples, rng)
    init = flat_distance(mu0, mu0_b)
    rhs = init + sum(terms.values())
    sup = float(np.max(dist))
    ratio = sup / rhs if rhs > 0 else (0.0 if sup == 0 else math.inf)
    return StabilityReport(dist.tolist(), sup, init, terms, rhs, C, C * rhs, ratio,
                           extra={"radius": R})


def initial_data_bound(model: ModelFunctions, cfg: SolverConfig, mass0: float) -> float:
    """Amplification of initial-data perturbations, ``sup_t rho_F(mu_t, nu_t) / rho_F(mu_0, nu_0)``.

    ``C e^{C int ||eta||_BL}`` with ``C`` the solver constant on the mass ball;
    for measure-dependent models the Gronwall factor ``e^{C_M int L_R}`` of
    the freeze-and-iterate coupling is included as well.
    """
    grid = cfg.grid()
    horizon = cfg.T - cfg.t0
    if not model.measure_dependent:
        R = None
        extra = 0.0
    else:
        R = mass_radius(model, mass0, grid)
        extra = nonlinear_constant(model, cfg.T, R, cfg.t0) * model.measure_lip_rate(horizon) * horizon
    C = solver_constant(model, cfg.T, t0=cfg.t0, radius=R)
    eta = float(np.sum([model.eta_bl(t) for t in grid[:-1]]) * cfg.dt)
    return C * math.exp(C * eta + extra)
