import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatpop.exceptions import ConfigurationError, InvalidArgumentError
from flatpop.spaces import (CircleSpace, DiscreteSpace, EuclideanSpace, GraphSpace, TrajectorySpace,
                            build_graph_space, build_trajectory_space, distance)


def test_euclidean_line():
    assert distance(EuclideanSpace(1), 0.0, 3.0) == 3.0


def test_circle_wraps_short_arc():
    C = CircleSpace(2 * math.pi)
    x, y = 0.1, 2 * math.pi - 0.1
    # brute force over both arcs
    arcs = [abs(y - x), 2 * math.pi - abs(y - x)]
    assert distance(C, x, y) == pytest.approx(min(arcs), abs=1e-12)
    assert distance(C, x, y) == pytest.approx(0.2, abs=1e-12)


@pytest.mark.parametrize("space,x", [
    (EuclideanSpace(2), [0.3, -1.0]),
    (CircleSpace(), 1.0),
    (DiscreteSpace(3), 2),
    (GraphSpace(2, [(0, 1, 2.0)]), [0, 0.5]),
    (TrajectorySpace([0.0, 1.0], EuclideanSpace(1)), [0.0, 1.0]),
])
def test_identity(space, x):
    assert space.distance(x, x) == 0.0


def test_path_graph_sum():
    G = build_graph_space(3, [(0, 1, 1.0), (1, 2, 1.0)])
    assert G.distance(G.vertex_point(0), G.vertex_point(2)) == 2.0


def test_triangle_shortcut():
    G = build_graph_space(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 10.0)])
    assert G.distance(G.vertex_point(0), G.vertex_point(2)) == 2.0


def test_edge_offset_remainder():
    G = build_graph_space(2, [(0, 1, 1.0)])
    assert G.distance(G.point(0, 0.3), G.vertex_point(1)) == pytest.approx(0.7, abs=1e-15)


def test_graph_matches_networkx(rng):
    edges = [(0, 1, 1.0), (1, 2, 0.4), (2, 3, 2.5), (3, 0, 0.7), (1, 3, 1.9), (3, 4, 0.3)]
    G = GraphSpace(5, edges)
    ref = nx.Graph()
    for a, b, w in edges:
        ref.add_edge(a, b, weight=w)
    lengths = dict(nx.all_pairs_dijkstra_path_length(ref))
    for i in range(5):
        for j in range(5):
            assert G.vertex_distances[i, j] == pytest.approx(lengths[i][j], abs=1e-12)
    # interior points: route through an endpoint of each edge, or along the shared edge
    for _ in range(50):
        e1, e2 = rng.integers(0, len(edges), 2)
        s1, s2 = rng.uniform(0, 1, 2) * [edges[e1][2], edges[e2][2]]
        a1, b1, L1 = edges[e1]
        a2, b2, L2 = edges[e2]
        cands = [s1 + lengths[a1][a2] + s2, s1 + lengths[a1][b2] + L2 - s2,
                 L1 - s1 + lengths[b1][a2] + s2, L1 - s1 + lengths[b1][b2] + L2 - s2]
        if e1 == e2:
            cands.append(abs(s1 - s2))
        assert G.distance(G.point(e1, s1), G.point(e2, s2)) == pytest.approx(min(cands), abs=1e-12)


def test_graph_rejects_bad_edges():
    with pytest.raises((ConfigurationError, InvalidArgumentError)):
        GraphSpace(2, [(0, 1, -1.0)])


def test_trajectory_sup_over_grid():
    T = build_trajectory_space([0.0, 1.0], EuclideanSpace(1))
    assert T.distance([0.0, 0.0], [1.0, 3.0]) == 3.0
    assert T.distance([0.0, 0.0], [0.0, 0.0]) == 0.0
    T3 = build_trajectory_space([0.0, 0.5, 1.0], EuclideanSpace(1))
    assert T3.distance([0.0, 0.0, 0.0], [0.0, 2.0, 1.0]) == 2.0


def test_discrete_scale():
    D = DiscreteSpace(3, scale=0.5, labels=["a", "b", "c"])
    assert D.distance(D.index("a"), D.index("c")) == 0.5
    assert D.distance(1, 1) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_metric_axioms_sampled(seed):
    rng = np.random.default_rng(seed)
    for sp in [EuclideanSpace(2), CircleSpace(3.0), DiscreteSpace(4),
               GraphSpace(3, [(0, 1, 1.0), (1, 2, 2.0)]), TrajectorySpace([0, 1], EuclideanSpace(1))]:
        x, y, z = sp.sample(rng, 3)
        dxy, dyx = sp.distance(x, y), sp.distance(y, x)
        assert dxy >= 0 and dxy == pytest.approx(dyx, abs=1e-12)
        assert dxy <= sp.distance(x, z) + sp.distance(z, y) + 1e-12


def test_point_text_round_trip(rng):
    for sp in [EuclideanSpace(2), CircleSpace(), DiscreteSpace(3, labels=["A", "B", "C"]),
               GraphSpace(2, [(0, 1, 1.5)]), TrajectorySpace([0, 0.5], EuclideanSpace(1))]:
        for x in sp.sample(rng, 5):
            assert sp.distance(sp.parse_point(sp.format_point(x)), x) == 0.0
