import math

import numpy as np
import pytest

from flatpop.consistency import (bump, consistency_report, derivative_check, fit_order,
                                 fixture_test_functions, split_check, weak_residual)
from flatpop.exceptions import InvalidArgumentError, UnsupportedBackendError
from flatpop.flows import ConstantField, ode_flow
from flatpop.linear import SolverConfig, solve_linear
from flatpop.measures import AtomicMeasure, MeasurePath
from flatpop.model import ConstantGrowth, ConstantInflux, ModelFunctions
from flatpop.spaces import CircleSpace, EuclideanSpace

E = EuclideanSpace(1)
CFG = SolverConfig()
TFS = {tf.name: tf for tf in fixture_test_functions()}


def test_bump_profile():
    X = np.array([[0.0], [8.0], [12.0], [16.0], [20.0]])
    v, g = bump(X, 8.0)
    assert v[0] == 1.0 and v[1] == 1.0 and v[3] == 0.0 and v[4] == 0.0
    assert 0.0 < v[2] < 1.0 and g[2, 0] < 0.0
    # gradient matches a central difference
    h = 1e-6
    num = (bump(X[2:3] + h, 8.0)[0] - bump(X[2:3] - h, 8.0)[0]) / (2 * h)
    assert g[2, 0] == pytest.approx(num[0], rel=1e-6)


def test_test_function_gradients():
    X = np.linspace(-3, 3, 11)[:, None]
    h = 1e-6
    for tf in TFS.values():
        v, g = tf.space_values(X)
        num = (tf.space_values(X + h)[0] - tf.space_values(X - h)[0]) / (2 * h)
        np.testing.assert_allclose(g[:, 0], num, atol=1e-6)


def test_zero_path_zero_residual():
    model = ModelFunctions(E)
    path = MeasurePath.constant(CFG.grid(), AtomicMeasure.zero(E))
    for tf in TFS.values():
        assert weak_residual(path, model, tf) == 0.0


def test_transport_residual_halves():
    model = ModelFunctions(E, flow=ode_flow(ConstantField(1.0), E, 128))
    mu0 = AtomicMeasure.dirac(E, 0.0)
    res = [weak_residual(solve_linear(mu0, model, CFG.with_(dt=dt))[0], model, TFS["sine"])
           for dt in (1 / 32, 1 / 64)]
    assert abs(res[1]) <= 0.5 * abs(res[0]) * 1.2
    assert abs(res[1]) >= 0.5 * abs(res[0]) * 0.8


def test_growth_residual_is_exponential_gap():
    model = ModelFunctions(E, growth=ConstantGrowth(1.0))
    path, _ = solve_linear(AtomicMeasure.dirac(E, 0.0), model, CFG)
    r = weak_residual(path, model, TFS["constant"])
    # mass identity: e^T - 1 versus its left Riemann sum
    grid = CFG.grid()
    expected = (math.e - 1) - CFG.dt * float(np.sum(np.exp(grid[:-1])))
    assert abs(r) == pytest.approx(abs(expected), rel=1e-9)
    assert abs(r) <= 2 * CFG.dt


def test_derivative_check_examples():
    static = ModelFunctions(E)
    path, _ = solve_linear(AtomicMeasure.dirac(E, 0.3), static, CFG)
    lhs, rhs = derivative_check(path, static, TFS["linear_poly"], 0.5)
    assert lhs == 0.0 and rhs == 0.0

    drift = ModelFunctions(E, flow=ode_flow(ConstantField(1.0), E, 128))
    path, _ = solve_linear(AtomicMeasure.dirac(E, 0.0), drift, CFG)
    lhs, rhs = derivative_check(path, drift, TFS["linear_poly"], 0.5)
    assert rhs == pytest.approx(1.0) and lhs == pytest.approx(1.0, abs=1e-9)

    grow = ModelFunctions(E, growth=ConstantGrowth(1.0))
    path, _ = solve_linear(AtomicMeasure.dirac(E, 0.0), grow, CFG)
    lhs, rhs = derivative_check(path, grow, TFS["constant"], 0.5)
    assert rhs == pytest.approx(math.exp(0.5), rel=1e-9)
    assert abs(lhs - rhs) <= 2 * CFG.dt ** 2

    with pytest.raises(InvalidArgumentError):
        derivative_check(path, grow, TFS["constant"], 0.0)


def test_split_identities():
    model = ModelFunctions(E, growth=ConstantGrowth(0.5), influx=ConstantInflux(E, 0.25, 1.0),
                           flow=ode_flow(ConstantField(1.0), E, 128))
    mu0 = AtomicMeasure.dirac(E, 0.0)
    path, _ = solve_linear(mu0, model, CFG)
    for tf in TFS.values():
        assert max(split_check(mu0, path, model, CFG, tf).values()) <= 1e-10


def test_fit_order():
    steps = np.array([1 / 32, 1 / 64, 1 / 128])
    assert fit_order(steps, 3 * steps) == pytest.approx(1.0)
    assert fit_order(steps, steps ** 2) == pytest.approx(2.0)
    assert fit_order(steps, np.zeros(3)) is None


def test_report_orders():
    model = ModelFunctions(E, growth=ConstantGrowth(1.0))
    mu0 = AtomicMeasure.dirac(E, 0.25)
    rep = consistency_report(lambda dt: solve_linear(mu0, model, CFG.with_(dt=dt))[0], model)
    assert 0.8 <= rep.combined_order <= 1.3
    assert set(rep.to_dict()) >= {"steps", "residuals", "orders", "combined_residuals", "combined_order"}


def test_non_euclidean_refused():
    C = CircleSpace()
    path = MeasurePath.constant(CFG.grid(), AtomicMeasure.dirac(C, 0.0))
    with pytest.raises(UnsupportedBackendError):
        weak_residual(path, ModelFunctions(C), TFS["constant"])
