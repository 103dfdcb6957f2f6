"""Scenario files: JSON with ``schema: 1`` and blocks ``space``, ``model``,
``initial``, ``solver`` and ``outputs``.

Every error raised while building a scenario is a
:class:`ConfigurationError` whose ``key`` names the offending entry, e.g.
``model.kernel.rate``.
"""
from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError, FlatpopError
from .flows import (AggregationField, ConstantField, DensityRotationFlow, GraphDriftFlow,
                    IdentityFlow, LinearField, ODEFlow, RotationFlow, ShiftFlow)
from .io import read_json
from .linear import SolverConfig
from .measures import AtomicMeasure
from .model import (ConstantGrowth, ConstantInflux, FunctionGrowth, LogisticGrowth, ModelFunctions,
                    PointMutationKernel, TransitionKernel, ZeroInflux, ZeroKernel)
from .spaces import CircleSpace, DiscreteSpace, EuclideanSpace, GraphSpace, TrajectorySpace

SCHEMA = 1
DEFAULT_SEED = 42
TOP_KEYS = {"schema", "name", "description", "seed", "space", "model", "initial", "solver", "outputs"}


def default_seed() -> int:
    """``FLATPOP_SEED`` from the environment, else 42."""
    raw = os.environ.get("FLATPOP_SEED")
    if raw is None or raw == "":
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"FLATPOP_SEED must be an integer, got {raw!r}", key="FLATPOP_SEED") from exc


# -- small readers ---------------------------------------------------------------------


def _block(d, key, where):
    v = d.get(key, {})
    if not isinstance(v, dict):
        raise ConfigurationError(f"{where}.{key} must be an object", key=f"{where}.{key}")
    return v


def _check_keys(d, allowed, where):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigurationError(f"unknown key {where}.{extra[0]}", key=f"{where}.{extra[0]}")


def _num(d, key, where, default=None, positive=False, nonneg=False):
    if key not in d:
        if default is None:
            raise ConfigurationError(f"missing {where}.{key}", key=f"{where}.{key}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigurationError(f"{where}.{key} must be a finite number", key=f"{where}.{key}")
    if positive and not v > 0:
        raise ConfigurationError(f"{where}.{key} must be positive", key=f"{where}.{key}")
    if nonneg and v < 0:
        raise ConfigurationError(f"{where}.{key} must be nonnegative", key=f"{where}.{key}")
    return float(v)


def _kind(d, where, choices):
    k = d.get("kind")
    if k not in choices:
        raise ConfigurationError(f"{where}.kind must be one of {', '.join(sorted(choices))}, got {k!r}",
                                 key=f"{where}.kind")
    return k


def _wrap(where):
    """Re-raise library errors from a builder as configuration errors at ``where``."""
    def deco(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except ConfigurationError as exc:
                if exc.key is None or not str(exc.key).startswith(where):
                    key = where if exc.key is None else f"{where}.{exc.key}"
                    raise ConfigurationError(str(exc), key=key) from exc
                raise
            except (FlatpopError, ValueError, TypeError) as exc:
                raise ConfigurationError(f"{where}: {exc}", key=where) from exc
        return inner
    return deco


def parse_point(space, value, where):
    """A point given as a location string, a number, a list, or ``{"vertex": v}``."""
    try:
        if isinstance(value, str):
            return space.parse_point(value)
        if isinstance(value, dict):
            if isinstance(space, GraphSpace) and set(value) == {"vertex"}:
                return space.vertex_point(int(value["vertex"]))
            raise ConfigurationError(f"{where}: unsupported point object", key=where)
        return space.as_point(np.asarray(value, dtype=float))
    except ConfigurationError:
        raise
    except (FlatpopError, ValueError, TypeError, IndexError, KeyError) as exc:
        raise ConfigurationError(f"{where}: invalid point {value!r} ({exc})", key=where) from exc


# -- builders ---------------------------------------------------------------------------


def build_space(d, where="space"):
    kind = _kind(d, where, {"euclidean", "circle", "discrete", "graph", "trajectory"})
    try:
        if kind == "euclidean":
            _check_keys(d, {"kind", "dim"}, where)
            return EuclideanSpace(int(_num(d, "dim", where, default=1, positive=True)))
        if kind == "circle":
            _check_keys(d, {"kind", "circumference"}, where)
            return CircleSpace(_num(d, "circumference", where, default=2 * math.pi, positive=True))
        if kind == "discrete":
            _check_keys(d, {"kind", "n_points", "scale", "labels"}, where)
            labels = d.get("labels")
            n = int(_num(d, "n_points", where, default=float(len(labels)) if labels else None, positive=True))
            return DiscreteSpace(n, _num(d, "scale", where, default=1.0, positive=True), labels)
        if kind == "graph":
            _check_keys(d, {"kind", "n_vertices", "edges"}, where)
            edges = d.get("edges")
            if not isinstance(edges, list) or not edges:
                raise ConfigurationError(f"{where}.edges must be a non-empty list", key=f"{where}.edges")
            for i, e in enumerate(edges):
                if not isinstance(e, list) or len(e) != 3:
                    raise ConfigurationError(f"{where}.edges[{i}] must be [tail, head, length]",
                                             key=f"{where}.edges")
            return GraphSpace(int(_num(d, "n_vertices", where, positive=True)),
                              [(int(a), int(b), float(w)) for a, b, w in edges])
        _check_keys(d, {"kind", "grid", "target"}, where)
        grid = d.get("grid")
        if not isinstance(grid, list):
            raise ConfigurationError(f"{where}.grid must be a list of times", key=f"{where}.grid")
        target = build_space(_block(d, "target", where), f"{where}.target")
        return TrajectorySpace(grid, target)
    except ConfigurationError as exc:
        if exc.key is None:
            raise ConfigurationError(str(exc), key=where) from exc
        raise
    except (FlatpopError, ValueError, TypeError) as exc:
        raise ConfigurationError(f"{where}: {exc}", key=where) from exc


def _shift_map(space, shift):
    if isinstance(space, CircleSpace):
        return lambda X: space.wrap(X + shift)
    return lambda X: X + shift


def build_growth(space, d, where="model.growth"):
    kind = _kind(d, where, {"constant", "logistic", "cosine"})
    if kind == "constant":
        _check_keys(d, {"kind", "c0"}, where)
        return ConstantGrowth(_num(d, "c0", where, default=0.0))
    if kind == "logistic":
        _check_keys(d, {"kind", "r", "K"}, where)
        return LogisticGrowth(_num(d, "r", where), _num(d, "K", where, positive=True))
    # c(x) = amplitude * cos(frequency * x) + offset on euclidean or circle spaces
    _check_keys(d, {"kind", "amplitude", "frequency", "offset"}, where)
    if not isinstance(space, (EuclideanSpace, CircleSpace)):
        raise ConfigurationError(f"{where}: cosine growth needs a euclidean or circle space", key=where)
    a = _num(d, "amplitude", where)
    k = _num(d, "frequency", where, default=1.0)
    c = _num(d, "offset", where, default=0.0)
    if isinstance(space, CircleSpace):
        # frequency counts periods per turn so the rate is continuous across the wrap
        scale = 2 * math.pi / space.circumference
        return FunctionGrowth(lambda t, X, mu: a * np.cos(k * scale * X) + c,
                              abs(a) + abs(c), abs(a * k * scale))
    return FunctionGrowth(lambda t, X, mu: a * np.cos(k * X[:, 0]) + c, abs(a) + abs(c), abs(a * k))


def build_kernel(space, d, where="model.kernel"):
    kind = _kind(d, where, {"zero", "point_mutation", "transition"})
    if kind == "zero":
        _check_keys(d, {"kind"}, where)
        return ZeroKernel(space)
    if kind == "transition":
        _check_keys(d, {"kind", "rates"}, where)
        if not isinstance(space, DiscreteSpace):
            raise ConfigurationError(f"{where}: transition kernels need a discrete space", key=where)
        return _wrap(where)(TransitionKernel)(space, d.get("rates"))
    _check_keys(d, {"kind", "rate", "shift", "target"}, where)
    rate = _num(d, "rate", where, nonneg=True)
    if ("shift" in d) == ("target" in d):
        raise ConfigurationError(f"{where} needs exactly one of shift or target", key=f"{where}.shift")
    if "target" in d:
        target = parse_point(space, d["target"], f"{where}.target")
        return PointMutationKernel(space, rate, lambda X: np.repeat(target[None, ...], len(X), axis=0), 0.0)
    if not isinstance(space, (EuclideanSpace, CircleSpace, TrajectorySpace)):
        raise ConfigurationError(f"{where}.shift needs a euclidean, circle or trajectory space",
                                 key=f"{where}.shift")
    shift = np.asarray(d["shift"], dtype=float)
    return PointMutationKernel(space, rate, _shift_map(space, shift), 1.0)


def build_influx(space, d, where="model.influx"):
    kind = _kind(d, where, {"zero", "constant"})
    if kind == "zero":
        _check_keys(d, {"kind"}, where)
        return ZeroInflux(space)
    _check_keys(d, {"kind", "source", "rate"}, where)
    if "source" not in d:
        raise ConfigurationError(f"missing {where}.source", key=f"{where}.source")
    source = parse_point(space, d["source"], f"{where}.source")
    return ConstantInflux(space, source, _num(d, "rate", where, default=1.0, nonneg=True))


def build_field(d, where):
    kind = _kind(d, where, {"constant", "linear", "aggregation"})
    if kind == "constant":
        _check_keys(d, {"kind", "velocity"}, where)
        if "velocity" not in d:
            raise ConfigurationError(f"missing {where}.velocity", key=f"{where}.velocity")
        return ConstantField(d["velocity"])
    if kind == "linear":
        _check_keys(d, {"kind", "A", "velocity", "sup"}, where)
        return LinearField(d.get("A", 1.0), d.get("velocity", 0.0), _num(d, "sup", where, default=math.inf))
    _check_keys(d, {"kind", "strength", "measure_lip", "sup"}, where)
    return AggregationField(_num(d, "strength", where, default=1.0),
                            _num(d, "measure_lip", where, nonneg=True),
                            _num(d, "sup", where, default=math.inf))


def build_flow(space, d, where="model.flow"):
    kind = _kind(d, where, {"identity", "ode", "rotation", "density_rotation", "graph_drift", "shift"})
    build = _wrap(where)
    if kind == "identity":
        _check_keys(d, {"kind"}, where)
        return IdentityFlow(space)
    if kind == "ode":
        _check_keys(d, {"kind", "field", "substeps_per_unit"}, where)
        field = build_field(_block(d, "field", where), f"{where}.field")
        return build(ODEFlow)(space, field, int(_num(d, "substeps_per_unit", where, default=100, positive=True)))
    if kind == "rotation":
        _check_keys(d, {"kind", "omega"}, where)
        return build(RotationFlow)(space, _num(d, "omega", where))
    if kind == "density_rotation":
        _check_keys(d, {"kind", "omega0"}, where)
        return build(DensityRotationFlow)(space, _num(d, "omega0", where))
    if kind == "graph_drift":
        _check_keys(d, {"kind", "speed", "policy", "routing", "lipschitz"}, where)
        routing = d.get("routing", {})
        if not isinstance(routing, dict):
            raise ConfigurationError(f"{where}.routing must map vertices to edges", key=f"{where}.routing")
        lip = d.get("lipschitz")
        return build(GraphDriftFlow)(space, _num(d, "speed", where, default=1.0, nonneg=True),
                                     d.get("policy", "absorb"), routing,
                                     None if lip is None else float(lip))
    _check_keys(d, {"kind", "velocity"}, where)
    return build(ShiftFlow)(space, d.get("velocity", 1.0))


def build_model(space, d, where="model"):
    _check_keys(d, {"growth", "kernel", "influx", "flow"}, where)
    growth = build_growth(space, _block(d, "growth", where) or {"kind": "constant"}, f"{where}.growth")
    kernel = build_kernel(space, _block(d, "kernel", where) or {"kind": "zero"}, f"{where}.kernel")
    influx = build_influx(space, _block(d, "influx", where) or {"kind": "zero"}, f"{where}.influx")
    flow = build_flow(space, _block(d, "flow", where) or {"kind": "identity"}, f"{where}.flow")
    return ModelFunctions(space, growth, kernel, influx, flow)


def build_initial(space, d, where="initial"):
    _check_keys(d, {"atoms"}, where)
    atoms = d.get("atoms", [])
    if not isinstance(atoms, list):
        raise ConfigurationError(f"{where}.atoms must be a list", key=f"{where}.atoms")
    locs, w = [], []
    for i, a in enumerate(atoms):
        at = f"{where}.atoms[{i}]"
        if not isinstance(a, dict):
            raise ConfigurationError(f"{at} must be an object", key=at)
        _check_keys(a, {"location", "weight"}, at)
        if "location" not in a:
            raise ConfigurationError(f"missing {at}.location", key=f"{at}.location")
        locs.append(parse_point(space, a["location"], f"{at}.location"))
        w.append(_num(a, "weight", at, nonneg=True))
    if not locs:
        return AtomicMeasure.zero(space)
    return AtomicMeasure(space, np.array(locs), w)


SOLVER_KEYS = {f.name for f in fields(SolverConfig)}


def build_solver(d, where="solver"):
    _check_keys(d, SOLVER_KEYS, where)
    kwargs = {}
    for key, value in d.items():
        if key == "quadrature":
            kwargs[key] = value
        elif key in ("max_iter", "outer_max_iter"):
            kwargs[key] = int(_num(d, key, where, positive=True))
        elif key in ("lam", "outer_lam") and value is None:
            kwargs[key] = None
        else:
            kwargs[key] = _num(d, key, where)
    try:
        return SolverConfig(**kwargs)
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), key=exc.key or where) from exc


OUTPUT_KEYS = {"dir", "snapshots", "diagnostics", "consistency", "consistency_file"}


@dataclass
class Scenario:
    name: str
    space: object
    model: ModelFunctions
    initial: AtomicMeasure
    solver: SolverConfig
    outputs: dict
    seed: int
    raw: dict


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``key.path=value`` strings; values are parsed as JSON when possible."""
    out = copy.deepcopy(raw)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} must look like key=value", key=item)
        key, text = item.split("=", 1)
        key = key.strip()
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                node[p] = {}
            node = node[p]
        node[parts[-1]] = value
    return out


def from_dict(raw: dict, overrides=None) -> Scenario:
    if not isinstance(raw, dict):
        raise ConfigurationError("scenario must be a JSON object", key="schema")
    raw = apply_overrides(raw, overrides)
    if raw.get("schema") != SCHEMA:
        raise ConfigurationError(f"schema must be {SCHEMA}, got {raw.get('schema')!r}", key="schema")
    _check_keys(raw, TOP_KEYS, "config")
    if "space" not in raw:
        raise ConfigurationError("missing space block", key="space")
    space = build_space(_block(raw, "space", "config"))
    model = build_model(space, _block(raw, "model", "config"))
    initial = build_initial(space, _block(raw, "initial", "config"))
    solver = build_solver(_block(raw, "solver", "config"))
    outputs = _block(raw, "outputs", "config")
    _check_keys(outputs, OUTPUT_KEYS, "outputs")
    name = str(raw.get("name", "scenario"))
    seed = raw.get("seed")
    seed = default_seed() if seed is None or "FLATPOP_SEED" in os.environ else int(seed)
    out = {"dir": f"flatpop_out/{name}", "snapshots": "snapshots.csv",
           "diagnostics": "diagnostics.json", "consistency": True,
           "consistency_file": "consistency.json"}
    out.update(outputs)
    return Scenario(name, space, model, initial, solver, out, seed, raw)


def bundled_scenarios() -> list:
    """Names of the scenario files shipped with the package."""
    root = resources.files("flatpop") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def resolve(path) -> Path:
    """A config path, falling back to the bundled scenario of that name."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.name.endswith(".cfg") else p.name + ".cfg"
    bundled = resources.files("flatpop") / "scenarios" / name
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigurationError(f"no such config file: {path}", key="config")


def load(path, overrides=None) -> Scenario:
    p = resolve(path)
    try:
        raw = read_json(p)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {p}: {exc.strerror}", key="config") from exc
    return from_dict(raw, overrides)


def load_space(path):
    """The space of a scenario file, or of a file holding just a space block."""
    p = resolve(path)
    raw = read_json(p)
    if isinstance(raw, dict) and "space" in raw:
        return build_space(_block(raw, "space", "config"))
    return build_space(raw)
