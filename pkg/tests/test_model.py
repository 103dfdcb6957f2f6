import math

import numpy as np
import pytest

from flatpop.exceptions import ModelValidationError
from flatpop.flows import RotationFlow, ode_flow, ConstantField
from flatpop.model import (ConstantGrowth, ConstantInflux, FunctionGrowth, LogisticGrowth, ModelFunctions,
                           PointMutationKernel, TransitionKernel, apriori_bound, check_model,
                           solver_constant, validate_assumptions)
from flatpop.spaces import CircleSpace, DiscreteSpace, EuclideanSpace

E = EuclideanSpace(1)


def test_all_zero_model_is_valid():
    rep = validate_assumptions(ModelFunctions(E))
    assert rep.valid
    assert all(r == 0.0 for k, r in rep.ratios.items() if not k.startswith("flow"))
    # the identity flow is an isometry, so its sampled ratio is exactly its bound
    assert rep.ratios["flow.lip"] == pytest.approx(1.0)


def test_sine_growth_valid():
    g = FunctionGrowth(lambda t, X, mu: np.sin(X[:, 0]), sup=1.0, lip=1.0)
    assert validate_assumptions(ModelFunctions(E, growth=g), box=(-10, 10)).valid


def test_understated_bound_refused():
    g = FunctionGrowth(lambda t, X, mu: 2 * X[:, 0], sup=1.0, lip=2.0)
    rep = validate_assumptions(ModelFunctions(E, growth=g), box=(0, 10))
    assert not rep.valid
    assert rep.ratios["growth.sup"] == pytest.approx(20.0, rel=0.05)
    with pytest.raises(ModelValidationError):
        check_model(ModelFunctions(E, growth=g), box=(0, 10))


def test_kernel_bounds_checked():
    D = DiscreteSpace(2)
    assert validate_assumptions(ModelFunctions(D, kernel=TransitionKernel(D, [[0, 1], [0.5, 0]]))).valid
    bad = PointMutationKernel(E, 1.0, lambda X: 3 * X, jump_lip=1.0)
    assert not validate_assumptions(ModelFunctions(E, kernel=bad)).valid


def test_solver_constant_examples():
    assert solver_constant(ModelFunctions(E), 1.0) == pytest.approx(1.0)
    assert solver_constant(ModelFunctions(E, growth=ConstantGrowth(0.7)), 1.0) == pytest.approx(math.exp(0.7))
    C = CircleSpace()
    g = FunctionGrowth(lambda t, X, mu: np.sin(X), sup=1.0, lip=1.0)
    m = ModelFunctions(C, growth=g, flow=RotationFlow(C, 1.0))
    assert solver_constant(m, 1.0) == pytest.approx(2 * math.e, rel=1e-9)


def test_apriori_bound_dominates_growth():
    m = ModelFunctions(E, growth=ConstantGrowth(0.5), influx=ConstantInflux(E, 0.0, 1.0))
    grid = np.linspace(0, 1, 65)
    B = apriori_bound(m, 1.0, grid)
    # exact mass is e^{t/2} + 2 (e^{t/2} - 1)
    assert np.all(B >= 3 * np.exp(grid / 2) - 2 - 1e-12)


def test_logistic_is_measure_dependent():
    m = ModelFunctions(E, growth=LogisticGrowth(1.0, 1.0))
    assert m.measure_dependent
    assert not ModelFunctions(E, flow=ode_flow(ConstantField(1.0), E)).measure_dependent
