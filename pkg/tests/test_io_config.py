import json

import numpy as np
import pytest

from flatpop import config
from flatpop.exceptions import ConfigurationError
from flatpop.flat import flat_distance
from flatpop.io import dumps_json, read_json, read_snapshots, snapshots_to_csv, write_snapshots
from flatpop.measures import AtomicMeasure, MeasurePath
from flatpop.spaces import CircleSpace, DiscreteSpace, EuclideanSpace, GraphSpace, TrajectorySpace

SPACES = [EuclideanSpace(1), EuclideanSpace(2), CircleSpace(), DiscreteSpace(3, labels=["A", "B", "C"]),
          GraphSpace(3, [(0, 1, 1.0), (1, 2, 0.7)]), TrajectorySpace([0.0, 0.5, 1.0], EuclideanSpace(1))]


@pytest.mark.parametrize("space", SPACES, ids=lambda s: s.kind)
def test_snapshot_round_trip(space, rng, tmp_path):
    grid = np.array([0.0, 1 / 3, 2 / 3])
    snaps = [AtomicMeasure(space, space.sample(rng, 4), rng.uniform(0, 1, 4) / 3) for _ in grid]
    snaps[1] = AtomicMeasure.zero(space)
    path = MeasurePath(grid, snaps)
    f = tmp_path / "s.csv"
    write_snapshots(path, f)
    back = read_snapshots(f, space)
    assert back.same_grid(path)
    for a, b in zip(path.snapshots, back.snapshots):
        assert flat_distance(a, b) == 0.0
        np.testing.assert_array_equal(a.weights, b.weights)


def test_csv_header():
    path = MeasurePath([0.0], [AtomicMeasure.dirac(EuclideanSpace(1), 0.5)])
    assert snapshots_to_csv(path).splitlines()[0] == "time,atom,location,weight"


def test_json_sorted_keys(tmp_path):
    text = dumps_json({"b": 1, "a": np.float64(0.5), "c": [np.int64(2)]})
    assert list(json.loads(text)) == ["a", "b", "c"]
    f = tmp_path / "bad.json"
    f.write_text("{oops")
    with pytest.raises(ConfigurationError):
        read_json(f)


def test_bundled_scenarios_parse():
    names = config.bundled_scenarios()
    for want in ("pure_transport.cfg", "logistic.cfg", "cell_graph.cfg", "crowd_circle.cfg",
                 "growth_mutation_halfline.cfg", "trajectory_shift.cfg"):
        assert want in names
    for n in names:
        sc = config.load(n)
        assert sc.solver.T > 0 and sc.initial.mass > 0


def _base():
    return json.loads(config.resolve("logistic").read_text())


@pytest.mark.parametrize("mutate,key", [
    (lambda r: r["model"]["growth"].update(kind="bogus"), "model.growth.kind"),
    (lambda r: r["solver"].update(dt="fast"), "solver.dt"),
    (lambda r: r["solver"].update(T=-1), "solver.T"),
    (lambda r: r.update(schema=2), "schema"),
    (lambda r: r.update(colour="red"), "colour"),
    (lambda r: r["space"].update(kind="torus"), "space.kind"),
    (lambda r: r["initial"]["atoms"][0].update(weight=-1), "initial.atoms[0].weight"),
])
def test_config_errors_name_the_key(mutate, key):
    raw = _base()
    mutate(raw)
    with pytest.raises(ConfigurationError) as exc:
        config.from_dict(raw)
    assert key in (exc.value.key or "") + str(exc.value)


def test_overrides():
    sc = config.from_dict(_base(), ["solver.dt=0.03125", "model.growth.r=2"])
    assert sc.solver.dt == 0.03125
    assert sc.model.growth.r == 2.0
    with pytest.raises(ConfigurationError):
        config.from_dict(_base(), ["solver.dt"])


def test_seed_precedence(monkeypatch):
    raw = _base()
    raw["seed"] = 7
    monkeypatch.delenv("FLATPOP_SEED", raising=False)
    assert config.from_dict(raw).seed == 7
    monkeypatch.setenv("FLATPOP_SEED", "11")
    assert config.from_dict(raw).seed == 11
    monkeypatch.delenv("FLATPOP_SEED")
    raw.pop("seed")
    assert config.from_dict(raw).seed == 42


def test_space_blocks():
    g = config.build_space({"kind": "graph", "n_vertices": 3, "edges": [[0, 1, 1.0], [1, 2, 2.0]]})
    assert g.distance(g.vertex_point(0), g.vertex_point(2)) == 3.0
    c = config.build_space({"kind": "circle", "circumference": 4.0})
    assert c.distance(0.5, 3.5) == 1.0
    with pytest.raises(ConfigurationError):
        config.build_space({"kind": "euclidean", "dim": 0})
