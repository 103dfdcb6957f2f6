import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from flatpop.flat import (bielecki_distance, bl_seminorms, flat_distance, flat_lp, flat_norm,
                          neighborhood_mass_gap, sup_flat_distance)
from flatpop.measures import AtomicMeasure, MeasurePath
from flatpop.oracles import flat_distance_grid
from flatpop.spaces import CircleSpace, DiscreteSpace, EuclideanSpace, GraphSpace, TrajectorySpace

E = EuclideanSpace(1)
SPACES = [EuclideanSpace(1), EuclideanSpace(2), CircleSpace(), DiscreteSpace(4, scale=0.7),
          GraphSpace(4, [(0, 1, 1.0), (1, 2, 0.5), (2, 3, 1.5), (3, 0, 0.8)]),
          TrajectorySpace([0.0, 0.5, 1.0], EuclideanSpace(1))]


def random_measure(sp, rng, n_max):
    n = int(rng.integers(1, n_max + 1))
    return AtomicMeasure(sp, sp.sample(rng, n, (-1.5, 1.5)), rng.uniform(0.05, 1.0, n))


def dense_lp(mu, nu):
    """Flat distance from the full dual LP with every pairwise constraint."""
    sp = mu.space
    locs = np.concatenate([mu.locations, nu.locations])
    c = np.concatenate([mu.weights, -nu.weights])
    D = sp.pairwise(locs)
    n = len(c)
    rows, rhs = [], []
    for i in range(n):
        for j in range(n):
            if i != j:
                r = np.zeros(n)
                r[i], r[j] = 1.0, -1.0
                rows.append(r)
                rhs.append(D[i, j])
    res = linprog(-c, A_ub=np.array(rows) if rows else None, b_ub=rhs if rows else None,
                  bounds=[(-1, 1)] * n, method="highs")
    return -res.fun


def test_self_distance_zero(rng):
    for sp in SPACES:
        mu = random_measure(sp, rng, 5)
        assert flat_distance(mu, mu) == 0.0


@pytest.mark.parametrize("a,b,d", [(1.0, 1.0, 5.0), (2.0, 0.5, 0.3), (1.5, 1.5, 1.0), (0.7, 0.2, 2.5)])
def test_dirac_pairs(a, b, d):
    mu, nu = AtomicMeasure.dirac(E, 0.0, a), AtomicMeasure.dirac(E, d, b)
    ref = (max(a, b) - min(a, b)) + min(a, b) * min(d, 2.0)
    assert flat_distance(mu, nu) == pytest.approx(ref, abs=1e-12)
    assert flat_distance(mu, nu) == pytest.approx(flat_distance_grid(mu, nu), abs=2e-3)


def test_far_diracs_cap_at_two():
    assert flat_distance(AtomicMeasure.dirac(E, 0.0), AtomicMeasure.dirac(E, 5.0)) == pytest.approx(2.0)


def test_matches_dense_lp(rng):
    for i in range(60):
        sp = SPACES[i % len(SPACES)]
        mu, nu = random_measure(sp, rng, 6), random_measure(sp, rng, 6)
        assert flat_distance(mu, nu) == pytest.approx(dense_lp(mu, nu), abs=1e-9)


@pytest.mark.parametrize("space", SPACES, ids=lambda s: s.kind)
def test_lp_certificate(space, rng):
    for _ in range(20):
        mu, nu = random_measure(space, rng, 8), random_measure(space, rng, 8)
        lp = flat_lp(mu, nu)
        sup, lip = bl_seminorms(lp.f, lp.dmat)
        assert sup <= 1 + 1e-9 and lip <= 1 + 1e-9
        assert float(lp.coeff @ lp.f) == pytest.approx(lp.value, abs=1e-9)


def test_bl_seminorms_examples():
    D2 = np.array([[0.0, 2.0], [2.0, 0.0]])
    assert bl_seminorms([3.0, 3.0], D2) == (3.0, 0.0)
    assert bl_seminorms([0.0, 3.0], D2) == (3.0, 1.5)
    pts = np.linspace(-2, 2, 9)[:, None]
    D = EuclideanSpace(1).pairwise(pts)
    assert bl_seminorms(np.abs(pts[:, 0] - 0.3), D)[1] <= 1.0 + 1e-12


def test_flat_norm_is_mass():
    mu = AtomicMeasure(E, [[0.0], [3.0]], [0.5, 1.25])
    assert flat_norm(mu) == pytest.approx(1.75)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 3.0))
def test_homogeneity_and_mass_bounds(seed, s):
    rng = np.random.default_rng(seed)
    sp = SPACES[seed % len(SPACES)]
    mu, nu = random_measure(sp, rng, 4), random_measure(sp, rng, 4)
    d = flat_distance(mu, nu)
    assert flat_distance(s * mu, s * nu) == pytest.approx(s * d, abs=1e-9)
    assert abs(mu.mass - nu.mass) <= d + 1e-9
    assert d <= mu.mass + nu.mass + 1e-9


def _path(points):
    return MeasurePath(np.arange(len(points)) * 0.25, [AtomicMeasure.dirac(E, x) for x in points])


def test_bielecki():
    p, q = _path([0.0, 0.1, 0.2, 0.3]), _path([0.05, 0.3, 0.6, 0.9])
    assert bielecki_distance(p, p, 1.0) == 0.0
    assert bielecki_distance(p, q, 1.0, f=0.0) == pytest.approx(sup_flat_distance(p, q))
    assert bielecki_distance(p, q, 50.0) == pytest.approx(flat_distance(p[0], q[0]), abs=1e-6)


def test_neighborhood_gap_examples():
    mu = AtomicMeasure(E, [[0.0], [1.0]], [1.0, 0.5])
    T = mu.locations[:1]
    assert neighborhood_mass_gap(mu, mu, T, 0.5) >= 0.0
    d, delta = 0.8, 0.5
    g = neighborhood_mass_gap(AtomicMeasure.dirac(E, 0.0), AtomicMeasure.dirac(E, d), [[0.0]], delta)
    assert g == pytest.approx(min(d, 2) / delta - 1)
    nu = AtomicMeasure(E, [[0.3], [2.0]], [0.2, 0.6])
    g = neighborhood_mass_gap(mu, nu, mu.locations, 1.0)
    assert g >= -1e-12
