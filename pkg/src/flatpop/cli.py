"""Command line entry point.

    flatpop run <cfg> [--set key=value]...
    flatpop verify <suite> [--inject-bad-quadrature]
    flatpop distance <a.csv> <b.csv> --space <cfg>
    flatpop scenarios

Exit codes: 0 success, 1 configuration or input error, 2 solver
non-convergence, 3 failed verification.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as _config
from .consistency import consistency_report
from .exceptions import ConfigurationError, ConvergenceError, FlatpopError, ModelValidationError
from .flat import flat_distance
from .io import read_snapshots, write_json, write_snapshots
from .model import check_model
from .nonlinear import solve
from .spaces import EuclideanSpace
from .verify import SUITES, format_table, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_VERIFY = 0, 1, 2, 3


def _err(msg):
    print(f"flatpop: error: {msg}", file=sys.stderr)


def _consistency_steps(cfg):
    n = cfg.n_steps
    if n % 2 == 0:
        return [2 * cfg.dt, cfg.dt, cfg.dt / 2]
    return [cfg.dt, cfg.dt / 2, cfg.dt / 4]


def cmd_run(args) -> int:
    try:
        sc = _config.load(args.config, args.set)
        seed = sc.seed if args.seed is None else args.seed
        report = check_model(sc.model, seed=seed, T=sc.solver.T,
                             radius=max(1.0, 2.0 * sc.initial.mass))
    except ModelValidationError as exc:
        _err(f"model refused: {exc}")
        return EXIT_CONFIG
    except ConfigurationError as exc:
        _err(f"{exc} [key: {exc.key}]" if exc.key else str(exc))
        return EXIT_CONFIG
    except FlatpopError as exc:
        _err(str(exc))
        return EXIT_CONFIG

    try:
        path, diag = solve(sc.initial, sc.model, sc.solver)
    except ConvergenceError as exc:
        _err(str(exc))
        return EXIT_DIVERGED
    except ConfigurationError as exc:
        _err(f"{exc} [key: {exc.key}]" if exc.key else str(exc))
        return EXIT_CONFIG
    except (FlatpopError, ArithmeticError) as exc:
        _err(str(exc))
        return EXIT_DIVERGED

    out = Path(sc.outputs["dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_snapshots(path, out / sc.outputs["snapshots"])
    payload = {"scenario": sc.name, "seed": seed, "solver": diag.to_dict(),
               "validation": report.to_dict()}
    write_json(payload, out / sc.outputs["diagnostics"])
    written = [out / sc.outputs["snapshots"], out / sc.outputs["diagnostics"]]

    if sc.outputs.get("consistency") and isinstance(sc.space, EuclideanSpace):
        def solve_at(dt):
            return solve(sc.initial, sc.model, sc.solver.with_(dt=dt))[0]
        try:
            rep = consistency_report(solve_at, sc.model, _consistency_steps(sc.solver))
        except ConvergenceError as exc:
            _err(f"consistency run: {exc}")
            return EXIT_DIVERGED
        write_json(rep.to_dict(), out / sc.outputs["consistency_file"])
        written.append(out / sc.outputs["consistency_file"])

    masses = path.masses()
    print(f"{sc.name}: {diag.iterations} iterations"
          + (f", {diag.outer_iterations} outer" if diag.outer_iterations else "")
          + f", final mass {masses[-1]:.10g}")
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = _config.default_seed() if args.seed is None else args.seed
    suites = SUITES if args.suite == "all" else [args.suite]
    quadrature = "inject_bad" if args.inject_bad_quadrature else "left"
    failed = False
    for suite in suites:
        results = run_suite(suite, seed=seed, quadrature=quadrature)
        print(f"[{suite}] seed {seed}")
        print(format_table(results))
        failed |= not all(r.ok for r in results)
    print("FAIL" if failed else "PASS")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_distance(args) -> int:
    try:
        space = _config.load_space(args.space)
        a = read_snapshots(args.a, space)
        b = read_snapshots(args.b, space)
    except ConfigurationError as exc:
        _err(f"{exc} [key: {exc.key}]" if exc.key else str(exc))
        return EXIT_CONFIG
    except (FlatpopError, OSError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if not a.same_grid(b):
        _err("time grids of the two files differ")
        return EXIT_CONFIG
    d = [flat_distance(x, y) for x, y in zip(a.snapshots, b.snapshots)]
    for t, v in zip(a.grid, d):
        print(f"{t:.17g}\t{v:.17g}")
    print(f"sup\t{float(np.max(d)):.17g}")
    return EXIT_OK


def cmd_scenarios(args) -> int:
    for name in _config.bundled_scenarios():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flatpop", description="Measure-valued population dynamics solver.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="solve a scenario and write snapshots and diagnostics")
    r.add_argument("config", help="scenario file, or the name of a bundled scenario")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. solver.dt=0.03125 (repeatable)")
    r.add_argument("--seed", type=int, default=None, help="sampling seed (default FLATPOP_SEED or 42)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run a property battery")
    v.add_argument("suite", choices=list(SUITES) + ["all"])
    v.add_argument("--inject-bad-quadrature", action="store_true",
                   help="debug: corrupt the growth quadrature so the battery must fail")
    v.add_argument("--seed", type=int, default=None)
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("distance", help="flat distance between two snapshot files")
    d.add_argument("a")
    d.add_argument("b")
    d.add_argument("--space", required=True, help="scenario file or file holding a space block")
    d.set_defaults(func=cmd_distance)

    s = sub.add_parser("scenarios", help="list bundled scenarios")
    s.set_defaults(func=cmd_scenarios)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        _err(f"{exc} [key: {exc.key}]" if exc.key else str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
