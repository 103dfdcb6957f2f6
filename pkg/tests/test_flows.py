import math

import numpy as np
import pytest

from flatpop.exceptions import InvalidArgumentError, UnsupportedBackendError
from flatpop.flows import (AggregationField, ConstantField, DensityRotationFlow, GraphDriftFlow,
                           IdentityFlow, LinearField, RotationFlow, ShiftFlow, cocycle_residual,
                           empirical_lipschitz, ode_flow)
from flatpop.measures import AtomicMeasure, MeasurePath
from flatpop.spaces import CircleSpace, EuclideanSpace, GraphSpace, TrajectorySpace

E = EuclideanSpace(1)


def test_zero_field_is_identity(rng):
    fl = ode_flow(ConstantField(0.0), E, 100)
    X = rng.normal(size=(10, 1))
    np.testing.assert_array_equal(fl(0.7, 0.1, X), X)


def test_constant_field_exact(rng):
    fl = ode_flow(ConstantField(1.0), E, 100)
    X = rng.normal(size=(10, 1))
    np.testing.assert_allclose(fl(0.9, 0.2, X), X + 0.7, atol=1e-12)


def test_exponential_field():
    fl = ode_flow(LinearField(1.0), E, 100)
    assert fl(1.0, 0.0, [[1.0]])[0, 0] == pytest.approx(math.e, abs=1e-6)


def test_identity_at_equal_times(rng):
    fl = ode_flow(LinearField(1.0), E, 100)
    X = rng.normal(size=(5, 1))
    np.testing.assert_array_equal(fl(0.3, 0.3, X), X)


def test_rotation():
    C = CircleSpace()
    rot = RotationFlow(C, 1.5)
    theta = np.array([0.2, 6.0])
    np.testing.assert_allclose(rot(2.0, 0.0, theta), np.mod(theta + 3.0, 2 * math.pi), atol=1e-12)


def test_graph_drift_absorbs_at_vertex():
    G = GraphSpace(2, [(0, 1, 1.0)])
    fl = GraphDriftFlow(G, 1.0, "absorb")
    end = fl(1.0, 0.0, [[0, 0.4]])
    assert G.distance(end[0], G.vertex_point(1)) == 0.0


def test_graph_drift_routes_through_vertex():
    G = GraphSpace(3, [(0, 1, 1.0), (1, 2, 1.0)])
    fl = GraphDriftFlow(G, 1.0, "route", {1: 1})
    out = fl(1.0, 0.0, [[0, 0.4]])
    assert G.distance(out[0], G.point(1, 0.4)) <= 1e-12
    with pytest.raises(UnsupportedBackendError):
        GraphDriftFlow(E, 1.0)


def test_cocycle_residuals(rng):
    X = rng.uniform(-2, 2, (30, 1))
    assert cocycle_residual(IdentityFlow(E), 1.0, 0.5, 0.0, X) == 0.0
    assert cocycle_residual(ode_flow(ConstantField(1.0), E, 100), 0.9, 0.4, 0.0, X) <= 1e-12
    assert cocycle_residual(ode_flow(LinearField(1.0), E, 100), 1.0, 0.5, 0.0, X) <= 1e-8


def test_exponential_flow_against_closed_form(rng):
    fl = ode_flow(LinearField(1.0), E, 100)
    X = rng.uniform(-2, 2, (30, 1))
    np.testing.assert_allclose(fl(1.0, 0.0, X), X * math.e, atol=1e-6 * 2)


def test_round_trip(rng):
    E2 = EuclideanSpace(2)
    fl = ode_flow(LinearField(np.array([[0.0, 1.0], [-1.0, 0.0]])), E2, 100)
    X = rng.uniform(-1, 1, (20, 2))
    np.testing.assert_allclose(fl(0.0, 1.0, fl(1.0, 0.0, X)), X, atol=1e-6)


def test_empirical_lipschitz(rng):
    X1, X2 = rng.uniform(-2, 2, (40, 1)), rng.uniform(-2, 2, (40, 1))
    assert empirical_lipschitz(IdentityFlow(E), 1.0, 0.0, X1, X2) == pytest.approx(1.0)
    C = CircleSpace()
    assert empirical_lipschitz(RotationFlow(C, 0.7), 1.0, 0.0, C.sample(rng, 40), C.sample(rng, 40)) \
        == pytest.approx(1.0, abs=1e-9)
    r = empirical_lipschitz(ode_flow(LinearField(1.0), E, 100), 1.0, 0.0, X1, X2)
    assert r <= math.e * (1 + 1e-6)
    assert ode_flow(LinearField(1.0), E, 100).lipschitz_bound(1.0) >= r


def test_measure_dependent_flows_need_a_path():
    agg = ode_flow(AggregationField(1.0, measure_lip=1.0), E, 64)
    with pytest.raises(InvalidArgumentError):
        agg(1.0, 0.0, [[0.0]])
    path = MeasurePath.constant([0.0, 1.0], AtomicMeasure(E, [[-1.0], [1.0]], [1.0, 1.0]))
    # frozen symmetric measure: the field pulls points towards the centre of mass 0
    out = agg(0.5, 0.0, [[1.0]], path)
    assert 0.0 < out[0, 0] < 1.0


def test_density_rotation_speed_depends_on_mass():
    C = CircleSpace()
    fl = DensityRotationFlow(C, 2.0)
    light = MeasurePath.constant([0.0, 1.0], AtomicMeasure.dirac(C, 0.0, 0.1))
    heavy = MeasurePath.constant([0.0, 1.0], AtomicMeasure.dirac(C, 0.0, 2.0))
    a = fl(0.5, 0.0, [0.0], light)[0]
    b = fl(0.5, 0.0, [0.0], heavy)[0]
    assert a != b


def test_shift_flow_translates_trajectories():
    T = TrajectorySpace([0.0, 1.0], EuclideanSpace(1))
    fl = ShiftFlow(T, [1.0, 0.5])
    np.testing.assert_allclose(fl(1.0, 0.0, [[0.0, 0.0]]), [[1.0, 0.5]])
    assert cocycle_residual(fl, 1.0, 0.3, 0.0, T.sample(np.random.default_rng(0), 5)) <= 1e-12
