import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from flatpop.exceptions import ConfigurationError, ConvergenceError
from flatpop.flat import flat_distance, sup_flat_distance
from flatpop.flows import ConstantField, RotationFlow, ode_flow
from flatpop.linear import SolverConfig, apply_solution_operator, solve_linear
from flatpop.measures import AtomicMeasure, MeasurePath
from flatpop.model import (ConstantGrowth, ConstantInflux, FunctionGrowth, ModelFunctions,
                           PointMutationKernel, TransitionKernel)
from flatpop.nonlinear import initial_data_bound
from flatpop.spaces import CircleSpace, DiscreteSpace, EuclideanSpace

E = EuclideanSpace(1)
CFG = SolverConfig()


def test_pure_transport_is_push_forward():
    model = ModelFunctions(E, flow=ode_flow(ConstantField(1.0), E, 128))
    mu0 = AtomicMeasure(E, [[0.0], [0.5]], [1.0, 2.0])
    res = apply_solution_operator(mu0, MeasurePath.constant(CFG.grid(), mu0), model, CFG)
    for t, snap in zip(CFG.grid(), res.path.snapshots):
        assert flat_distance(snap, AtomicMeasure(E, mu0.locations + t, mu0.weights)) <= 1e-12


def test_constant_growth_discrete_exponential():
    model = ModelFunctions(E, growth=ConstantGrowth(0.8))
    path, diag = solve_linear(AtomicMeasure.dirac(E, 0.0, 2.0), model, CFG)
    np.testing.assert_allclose(path.masses(), 2.0 * np.exp(0.8 * CFG.grid()), rtol=1e-12)
    assert diag.iterations == 2


def test_influx_left_riemann_sum():
    model = ModelFunctions(E, influx=ConstantInflux(E, 0.0, 1.0))
    path, _ = solve_linear(AtomicMeasure.zero(E), model, CFG)
    np.testing.assert_allclose(path.masses(), CFG.grid(), atol=1e-12)


def test_two_state_against_ode():
    D = DiscreteSpace(2, labels=["A", "B"])
    rates = np.array([[0.0, 1.0], [0.5, 0.0]])
    loss = FunctionGrowth(lambda t, X, mu: np.where(X == 0, -1.0, -0.5), 1.0, 1.0)
    model = ModelFunctions(D, growth=loss, kernel=TransitionKernel(D, rates))
    path, _ = solve_linear(AtomicMeasure.dirac(D, "A"), model, CFG)
    # m_A' = -m_A + 0.5 m_B, m_B' = m_A - 0.5 m_B
    ref = solve_ivp(lambda t, m: [-m[0] + 0.5 * m[1], m[0] - 0.5 * m[1]], (0, 1), [1.0, 0.0],
                    t_eval=CFG.grid(), rtol=1e-11, atol=1e-12).y
    mA = [float(np.sum(s.weights[s.locations == 0])) for s in path.snapshots]
    mB = [float(np.sum(s.weights[s.locations == 1])) for s in path.snapshots]
    assert np.max(np.abs(mA - ref[0])) <= 3 * CFG.dt
    assert np.max(np.abs(mB - ref[1])) <= 3 * CFG.dt


def _mutation_model():
    return ModelFunctions(E, growth=FunctionGrowth(lambda t, X, mu: 0.5 * np.cos(X[:, 0]), 0.5, 0.5),
                          kernel=PointMutationKernel(E, 0.5, lambda X: X + 0.125, 1.0),
                          flow=ode_flow(ConstantField(1.0), E, 128))


def test_bielecki_contraction():
    path, diag = solve_linear(AtomicMeasure.dirac(E, 0.0), _mutation_model(), CFG.with_(tol=1e-13))
    r = diag.residuals
    assert len(r) >= 3
    for a, b in zip(r, r[1:]):
        assert b <= 0.5 * a + 1e-9


def test_non_convergence_raises():
    with pytest.raises(ConvergenceError) as exc:
        solve_linear(AtomicMeasure.dirac(E, 0.0), _mutation_model(), CFG.with_(max_iter=2))
    assert exc.value.residuals


def test_continuity_in_initial_data(rng):
    model = _mutation_model()
    mu0 = AtomicMeasure(E, [[0.0], [0.5]], [1.0, 0.5])
    cfg = CFG.with_(dt=1 / 32, T=0.5)
    p, _ = solve_linear(mu0, model, cfg)
    bound = initial_data_bound(model, cfg, 1.5)
    for _ in range(2):
        nu0 = AtomicMeasure(E, mu0.locations + rng.integers(-2, 3, (2, 1)) / 32, mu0.weights * rng.uniform(0.8, 1.2, 2))
        q, _ = solve_linear(nu0, model, cfg)
        assert sup_flat_distance(p, q) <= bound * flat_distance(mu0, nu0) * (1 + 1e-9)


def test_solution_on_circle_keeps_mass():
    C = CircleSpace()
    model = ModelFunctions(C, flow=RotationFlow(C, 1.0))
    path, _ = solve_linear(AtomicMeasure.dirac(C, 6.0), model, CFG)
    np.testing.assert_allclose(path.masses(), 1.0)
    assert C.distance(path.snapshots[-1].locations[0], math.fmod(7.0, 2 * math.pi)) <= 1e-12


def test_config_validation():
    with pytest.raises(ConfigurationError) as exc:
        SolverConfig(dt=0.0)
    assert exc.value.key == "solver.dt"
    with pytest.raises(ConfigurationError):
        SolverConfig(dt=0.1, T=-1.0)
