import math

import numpy as np
import pytest

from flatpop.exceptions import InvalidArgumentError
from flatpop.flat import flat_distance
from flatpop.measures import (AtomicMeasure, MeasurePath, add, add_all, compact, integrate,
                              push_forward, reweight, scale)
from flatpop.spaces import CircleSpace, EuclideanSpace, GraphSpace

E = EuclideanSpace(1)


def test_integrate_examples():
    assert integrate(AtomicMeasure.dirac(E, 0.4, 2.0), lambda X: np.ones(len(X))) == 2.0
    mu = AtomicMeasure(E, [[1.0], [4.0]], [1.0, 1.0])
    assert integrate(mu, lambda X: np.abs(X[:, 0] - 1.0)) == 3.0
    assert integrate(AtomicMeasure.zero(E), lambda X: X[:, 0]) == 0.0


def test_push_forward_examples():
    mu = AtomicMeasure(E, [[0.0], [2.0]], [1.0, 0.5])
    assert flat_distance(push_forward(mu, lambda X: X), mu) == 0.0
    moved = push_forward(AtomicMeasure.dirac(E, 0.0, 3.0), lambda X: X + 1.0)
    np.testing.assert_array_equal(moved.locations, [[1.0]])
    np.testing.assert_array_equal(moved.weights, [3.0])


def test_push_forward_change_of_variables(rng):
    for _ in range(20):
        mu = AtomicMeasure(E, rng.normal(size=(5, 1)), rng.uniform(0, 1, 5))
        a, b = rng.normal(size=2)
        T = lambda X: a * X + b
        psi = lambda X: np.sin(X[:, 0]) + X[:, 0] ** 2
        lhs = integrate(push_forward(mu, T), psi)
        rhs = float(np.dot(mu.weights, [math.sin(a * x + b) + (a * x + b) ** 2 for x in mu.locations[:, 0]]))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_reweight_examples():
    mu = AtomicMeasure(E, [[0.0], [1.0]], [1.0, 2.0])
    assert flat_distance(reweight(mu, lambda X: np.ones(len(X))), mu) == 0.0
    assert reweight(mu, lambda X: np.full(len(X), math.e)).mass == pytest.approx(3 * math.e)
    killed = reweight(mu, lambda X: (X[:, 0] > 0.5).astype(float))
    assert len(killed) == 2 and killed.weights[0] == 0.0
    with pytest.raises(InvalidArgumentError):
        reweight(mu, lambda X: -np.ones(len(X)))


def test_add_and_scale():
    mu = AtomicMeasure(E, [[0.0], [1.0]], [1.0, 2.0])
    nu = AtomicMeasure.dirac(E, 3.0, 0.5)
    assert flat_distance(add(mu, AtomicMeasure.zero(E)), mu) == 0.0
    assert len(scale(mu, 0.0)) == 0
    assert add(mu, nu).tv_norm == mu.tv_norm + nu.tv_norm
    assert (mu + nu).mass == 3.5 and (2 * mu).mass == 6.0
    assert add_all([mu, nu, mu]).mass == 6.5
    with pytest.raises(InvalidArgumentError):
        scale(mu, -1.0)
    with pytest.raises(InvalidArgumentError):
        add(mu, AtomicMeasure.dirac(CircleSpace(), 0.0))


def test_rejects_negative_weights():
    with pytest.raises(InvalidArgumentError):
        AtomicMeasure(E, [[0.0]], [-1.0])
    with pytest.raises(InvalidArgumentError):
        AtomicMeasure(E, [[0.0], [1.0]], [1.0])


def test_compact_exact_duplicates():
    mu = AtomicMeasure(E, [[0.0], [1.0], [0.0]], [1.0, 2.0, 0.5])
    out = compact(mu)
    assert len(out) == 2
    assert flat_distance(out, mu) == 0.0


def test_compact_merge_radius():
    mu = AtomicMeasure(E, [[0.0], [0.1]], [1.0, 1.0])
    out = compact(mu, merge_radius=0.2)
    assert len(out) == 1 and out.weights[0] == 2.0
    np.testing.assert_array_equal(out.locations, [[0.0]])
    assert flat_distance(out, mu) <= 0.1 + 1e-12


def test_compact_floor_drops_everything():
    mu = AtomicMeasure(E, [[0.0], [1.0]], [0.1, 0.2])
    out, dropped = compact(mu, weight_floor=1.0, return_dropped=True)
    assert len(out) == 0 and dropped == pytest.approx(0.3)


def test_compact_error_budget(rng):
    G = GraphSpace(3, [(0, 1, 1.0), (1, 2, 1.0)])
    for sp in [E, CircleSpace(), G]:
        for _ in range(10):
            mu = AtomicMeasure(sp, sp.sample(rng, 12), rng.uniform(0, 1, 12))
            eps, floor = 0.3, 0.1
            out, dropped = compact(mu, eps, floor, return_dropped=True)
            assert flat_distance(out, mu) <= eps * mu.mass + dropped + 1e-9


def test_path_validation_and_lookup():
    mu = AtomicMeasure.dirac(E, 0.0)
    p = MeasurePath.constant([0.0, 0.5, 1.0], mu)
    assert p.T == 1.0 and len(p) == 3
    assert p.index_at(0.7) == 1 and p.index_at(1.0) == 2
    with pytest.raises(InvalidArgumentError):
        MeasurePath([0.0, 0.0], (mu, mu))
    with pytest.raises(InvalidArgumentError):
        MeasurePath([0.0, 1.0], (mu,))
