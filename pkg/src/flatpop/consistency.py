"""Weak-form checks of solver output on Euclidean spaces.

A path ``mu`` solves the PDE in the weak sense when, for test functions
``phi(t, x) = varphi(t) psi(x)``,

    int phi(T) d mu_T - int phi(0) d mu_0
        = int_0^T int [d_t phi + grad phi . b + phi c] d mu_t dt
          + int_0^T int int phi(t, y) d eta(t, x)(y) d mu_t(x) dt
          + int_0^T int phi(t) d N(t) dt.

All time integrals use the left rule on the path grid, so the residual of a
first-order scheme should shrink linearly with the step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError, UnsupportedBackendError
from .linear import SolverConfig, _jsonable, apply_solution_operator
from .measures import AtomicMeasure, MeasurePath
from .model import ModelFunctions
from .spaces import EuclideanSpace


# -- test functions ---------------------------------------------------------------


def _f(u):
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def _df(u):
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos]) / u[pos] ** 2
    return out


def bump(X, radius):
    """Smooth cutoff: 1 for ``|x| <= radius``, 0 for ``|x| >= 2 radius``.

    Returns the values and gradients on an ``(n, d)`` array.
    """
    X = np.asarray(X, dtype=float)
    r = np.linalg.norm(X, axis=1)
    s = np.clip(r / radius - 1.0, 0.0, 1.0)
    a, b = _f(1.0 - s), _f(s)
    den = a + b
    val = a / den
    dval_ds = (-_df(1.0 - s) * b - a * _df(s)) / den ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(r[:, None] > 0, X / r[:, None], 0.0)
    grad = (dval_ds / radius)[:, None] * unit
    return val, grad


@dataclass(frozen=True)
class TestFunction:
    """Separable ``varphi(t) psi(x)`` with ``psi`` cut off outside ``2 * radius``.

    ``psi(X) -> (n,)`` and ``grad_psi(X) -> (n, d)`` act on point arrays;
    ``radius=None`` disables the cutoff.
    """

    __test__ = False

    name: str
    phi: object
    dphi: object
    psi: object
    grad_psi: object
    radius: float | None = 8.0

    def space_values(self, X):
        X = np.asarray(X, dtype=float).reshape(len(X), -1)
        v = np.asarray(self.psi(X), dtype=float).reshape(len(X))
        g = np.asarray(self.grad_psi(X), dtype=float).reshape(X.shape)
        if self.radius is None:
            return v, g
        chi, dchi = bump(X, self.radius)
        return v * chi, g * chi[:, None] + v[:, None] * dchi

    def __call__(self, t, X):
        return self.phi(t) * self.space_values(X)[0]


def _x0(X):
    return X[:, 0]


def _e0(X):
    g = np.zeros_like(X)
    g[:, 0] = 1.0
    return g


def fixture_test_functions(radius: float = 8.0):
    """The six canonical test functions used by the consistency battery."""
    one = lambda t: 1.0
    zero = lambda t: 0.0
    return [
        TestFunction("constant", one, zero,
                     lambda X: np.ones(len(X)), np.zeros_like, radius),
        TestFunction("linear_poly", lambda t: 1.0 + t, lambda t: 1.0, _x0, _e0, radius),
        TestFunction("quadratic_poly", lambda t: math.exp(-t), lambda t: -math.exp(-t),
                     lambda X: np.sum(X ** 2, axis=1), lambda X: 2.0 * X, radius),
        TestFunction("sine", math.cos, lambda t: -math.sin(t),
                     lambda X: np.sin(X[:, 0]), lambda X: np.cos(X[:, 0])[:, None] * _e0(X), radius),
        TestFunction("cosine", lambda t: 1.0 + math.sin(t), math.cos,
                     lambda X: np.cos(2.0 * X[:, 0]),
                     lambda X: -2.0 * np.sin(2.0 * X[:, 0])[:, None] * _e0(X), radius),
        TestFunction("gaussian", lambda t: t * t, lambda t: 2.0 * t,
                     lambda X: np.exp(-np.sum(X ** 2, axis=1)),
                     lambda X: -2.0 * X * np.exp(-np.sum(X ** 2, axis=1))[:, None], radius),
    ]


# -- residuals -----------------------------------------------------------------------


def _require_euclidean(model):
    if not isinstance(model.space, EuclideanSpace):
        raise UnsupportedBackendError("weak-form checks need a euclidean space")


def _frozen_arg(model, mu):
    return mu if model.measure_dependent else None


def _pair(mu, values):
    return float(np.dot(mu.weights, values)) if len(mu) else 0.0


def generator_terms(model: ModelFunctions, t, mu: AtomicMeasure, tf: TestFunction) -> dict:
    """The four pieces of ``F'(t)`` for ``F(t) = int psi d mu_t``.

    ``transport = int grad psi . b``, ``growth = int psi c``,
    ``kernel = int int psi d eta d mu`` and ``influx = int psi d N``.
    """
    arg = _frozen_arg(model, mu)
    out = {"transport": 0.0, "growth": 0.0, "kernel": 0.0, "influx": 0.0}
    if len(mu):
        X = mu.locations
        v, g = tf.space_values(X)
        b = np.asarray(model.velocity(t, X, arg), dtype=float).reshape(X.shape)
        out["transport"] = _pair(mu, np.sum(g * b, axis=1))
        out["growth"] = _pair(mu, v * model.growth.rate(t, X, arg))
        src, locs, w = model.kernel.emit(t, X, arg)
        if len(w):
            vy = tf.space_values(model.space.as_points(locs))[0]
            out["kernel"] = float(np.sum(mu.weights[src] * w * vy))
    N = model.influx.measure(t, arg)
    if len(N):
        out["influx"] = _pair(N, tf.space_values(N.locations)[0])
    return out


def weak_residual(path: MeasurePath, model: ModelFunctions, tf: TestFunction) -> float:
    """Left side minus right side of the weak formulation, left-rule in time."""
    _require_euclidean(model)
    grid = path.grid
    F = np.array([_pair(mu, tf.space_values(mu.locations)[0]) if len(mu) else 0.0
                  for mu in path.snapshots])
    lhs = tf.phi(grid[-1]) * F[-1] - tf.phi(grid[0]) * F[0]
    rhs = 0.0
    for k in range(len(grid) - 1):
        t, dt = grid[k], grid[k + 1] - grid[k]
        gen = sum(generator_terms(model, t, path.snapshots[k], tf).values())
        rhs += dt * (tf.dphi(t) * F[k] + tf.phi(t) * gen)
    return float(lhs - rhs)


def derivative_check(path: MeasurePath, model: ModelFunctions, tf: TestFunction, t: float):
    """Central difference of ``F(t) = int psi d mu_t`` against the generator.

    ``t`` must be an interior grid time. Returns ``(lhs, rhs)``.
    """
    _require_euclidean(model)
    grid = path.grid
    k = int(np.argmin(np.abs(grid - t)))
    if abs(grid[k] - t) > 1e-12 * max(1.0, abs(t)):
        raise InvalidArgumentError("derivative check needs a grid time")
    if k == 0 or k == len(grid) - 1:
        raise InvalidArgumentError("derivative check needs an interior grid time")

    def F(j):
        mu = path.snapshots[j]
        return _pair(mu, tf.space_values(mu.locations)[0]) if len(mu) else 0.0

    lhs = (F(k + 1) - F(k - 1)) / (grid[k + 1] - grid[k - 1])
    rhs = sum(generator_terms(model, grid[k], path.snapshots[k], tf).values())
    return float(lhs), float(rhs)


def split_check(mu0: AtomicMeasure, path: MeasurePath, model: ModelFunctions, cfg: SolverConfig,
                tf: TestFunction) -> dict:
    """Compare the transport and growth pieces assembled per source with the totals.

    The operator is re-applied to ``path`` with its contributions kept apart
    (initial datum, kernel, influx). At every grid time the sum over the
    three parts of ``int grad psi . b`` and of ``int psi c`` must equal the
    value on the whole measure. Returns the largest discrepancies.
    """
    _require_euclidean(model)
    frozen = path if model.measure_dependent else None
    res = apply_solution_operator(mu0, path, model, cfg, frozen=frozen, decompose=True)
    worst = {"transport": 0.0, "growth": 0.0}
    for k, t in enumerate(res.path.grid):
        mu = res.path.snapshots[k]
        total = generator_terms(model, t, mu, tf)
        arg = _frozen_arg(model, mu)
        for key in worst:
            acc = 0.0
            for part in res.parts.values():
                nu = part.snapshots[k]
                if not len(nu):
                    continue
                X = nu.locations
                v, g = tf.space_values(X)
                if key == "transport":
                    b = np.asarray(model.velocity(t, X, arg), dtype=float).reshape(X.shape)
                    acc += _pair(nu, np.sum(g * b, axis=1))
                else:
                    acc += _pair(nu, v * model.growth.rate(t, X, arg))
            worst[key] = max(worst[key], abs(acc - total[key]))
    return worst


def fit_order(steps, residuals):
    """Least-squares slope of ``log|residual|`` against ``log(step)``."""
    steps = np.asarray(steps, dtype=float)
    r = np.abs(np.asarray(residuals, dtype=float))
    if np.any(r == 0):
        return None
    return float(np.polyfit(np.log(steps), np.log(r), 1)[0])


@dataclass
class ConsistencyReport:
    steps: list
    residuals: dict
    orders: dict
    combined: list
    combined_order: float | None
    cutoff_radius: float | None

    def to_dict(self):
        return _jsonable({"combined_order": self.combined_order, "combined_residuals": self.combined,
                          "cutoff_radius": self.cutoff_radius, "orders": self.orders,
                          "residuals": self.residuals, "steps": self.steps})


def consistency_report(solve_fn, model: ModelFunctions, steps=(1 / 32, 1 / 64, 1 / 128),
                       test_functions=None) -> ConsistencyReport:
    """Residuals of every test function at several step sizes, with fitted orders.

    ``solve_fn(dt) -> MeasurePath`` produces the solution at step ``dt``.
    ``combined`` is the largest absolute residual over the test functions,
    which is what the overall order is fitted to.
    """
    _require_euclidean(model)
    tfs = fixture_test_functions() if test_functions is None else list(test_functions)
    residuals = {tf.name: [] for tf in tfs}
    for dt in steps:
        path = solve_fn(dt)
        for tf in tfs:
            residuals[tf.name].append(weak_residual(path, model, tf))
    orders = {name: fit_order(steps, r) for name, r in residuals.items()}
    combined = [max(abs(residuals[tf.name][i]) for tf in tfs) for i in range(len(steps))]
    radius = tfs[0].radius if tfs else None
    return ConsistencyReport(list(steps), residuals, orders, combined, fit_order(steps, combined), radius)
