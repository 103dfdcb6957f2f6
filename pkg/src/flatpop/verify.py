"""Property batteries behind ``flatpop verify <suite>``.

Each check returns ``(ok, detail)``; a suite is a list of named checks run
with a fixed seed. The reference values come from :mod:`flatpop.oracles` and
closed forms, never from the code under test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .consistency import (consistency_report, derivative_check, fixture_test_functions,
                          split_check)
from .exceptions import ConvergenceError
from .flat import flat_distance, neighborhood_mass_gap, sup_flat_distance
from .flows import (AggregationField, ConstantField, GraphDriftFlow, IdentityFlow, LinearField,
                    RotationFlow, cocycle_residual, empirical_lipschitz, ode_flow)
from .linear import SolverConfig, solve_linear
from .measures import AtomicMeasure, MeasurePath, add
from .model import (ConstantGrowth, ConstantInflux, FunctionGrowth, LogisticGrowth, ModelFunctions,
                    PointMutationKernel, TransitionKernel)
from .nonlinear import solve_nonlinear, stability_experiment
from .oracles import dirac_flat_distance, flat_distance_grid, floyd_warshall, logistic_mass
from .spaces import CircleSpace, DiscreteSpace, EuclideanSpace, GraphSpace, TrajectorySpace

SUITES = ("flat", "flows", "linear", "nonlinear", "pde")


@dataclass
class CheckResult:
    suite: str
    name: str
    ok: bool
    detail: str


# -- random instances --------------------------------------------------------------------


def random_spaces():
    """One space of every backend, small enough for exhaustive oracles."""
    return [
        EuclideanSpace(1),
        EuclideanSpace(2),
        CircleSpace(2 * math.pi),
        DiscreteSpace(4, scale=0.7),
        GraphSpace(4, [(0, 1, 1.0), (1, 2, 0.5), (2, 3, 1.5), (3, 0, 0.8)]),
        TrajectorySpace([0.0, 0.5, 1.0], EuclideanSpace(1)),
    ]


def random_measure(space, rng, n_max, total=None, box=(-1.5, 1.5)):
    n = int(rng.integers(1, n_max + 1))
    w = rng.uniform(0.05, 1.0, n)
    if total is not None:
        w *= rng.uniform(0.1, total) / w.sum()
    return AtomicMeasure(space, space.sample(rng, n, box), w)


# -- flat -------------------------------------------------------------------------------


def check_flat_oracle(rng, n_pairs=200, tol=2e-3):
    worst = 0.0
    spaces = random_spaces()
    for i in range(n_pairs):
        sp = spaces[i % len(spaces)]
        mu, nu = random_measure(sp, rng, 3, total=1.0), random_measure(sp, rng, 3, total=1.0)
        worst = max(worst, abs(flat_distance(mu, nu) - flat_distance_grid(mu, nu)))
    return worst <= tol, f"max |LP - grid| = {worst:.2e} over {n_pairs} pairs (tol {tol:g})"


def check_metric_axioms(rng, n_triples=1000, tol=1e-8):
    spaces = random_spaces()
    sym = tri = ident = 0.0
    for i in range(n_triples):
        sp = spaces[i % len(spaces)]
        a, b, c = (random_measure(sp, rng, 8) for _ in range(3))
        ab, ba = flat_distance(a, b), flat_distance(b, a)
        sym = max(sym, abs(ab - ba))
        tri = max(tri, ab - flat_distance(a, c) - flat_distance(c, b))
        ident = max(ident, flat_distance(a, a))
    ok = sym == 0.0 and tri <= tol and ident <= tol
    return ok, f"asymmetry {sym:.1e}, triangle excess {tri:.1e}, d(a,a) {ident:.1e}"


def check_dirac_formula(rng, n=200, tol=1e-9):
    worst = 0.0
    spaces = random_spaces()
    for i in range(n):
        sp = spaces[i % len(spaces)]
        x, y = sp.sample(rng, 2, (-3.0, 3.0))
        a, b = rng.uniform(0.0, 2.0, 2)
        mu, nu = AtomicMeasure(sp, x[None, ...], [a]), AtomicMeasure(sp, y[None, ...], [b])
        worst = max(worst, abs(flat_distance(mu, nu) - dirac_flat_distance(a, b, sp.distance(x, y))))
    return worst <= tol, f"max deviation {worst:.1e} over {n} Dirac pairs"


def check_neighborhood_gap(rng, n=500, tol=1e-9):
    worst = math.inf
    spaces = random_spaces()
    for i in range(n):
        sp = spaces[i % len(spaces)]
        mu, nu = random_measure(sp, rng, 5), random_measure(sp, rng, 5)
        k = int(rng.integers(0, len(mu) + 1))
        T = mu.locations[rng.permutation(len(mu))[:k]]
        if rng.uniform() < 0.3 and len(nu):
            T = np.concatenate([T, nu.locations[:1]])
        worst = min(worst, neighborhood_mass_gap(mu, nu, T, float(rng.uniform(0.05, 1.0))))
    return worst >= -tol, f"smallest gap {worst:.3e} over {n} instances"


def check_homogeneity_dominance(rng, n=100, tol=1e-9):
    spaces = random_spaces()
    hom = dom = mass = 0.0
    for i in range(n):
        sp = spaces[i % len(spaces)]
        mu, nu = random_measure(sp, rng, 6), random_measure(sp, rng, 6)
        s = float(rng.uniform(0.0, 3.0))
        d = flat_distance(mu, nu)
        hom = max(hom, abs(flat_distance(s * mu, s * nu) - s * d))
        dom = max(dom, d - (mu.mass + nu.mass))
        mass = max(mass, abs(mu.mass - nu.mass) - d)
    ok = hom <= tol * 10 and dom <= tol and mass <= tol
    return ok, f"homogeneity {hom:.1e}, TV excess {dom:.1e}, mass-gap excess {mass:.1e}"


def check_graph_distances(rng):
    sp = GraphSpace(5, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 10.0), (2, 3, 0.5), (3, 4, 2.0), (4, 0, 3.0)])
    ref = floyd_warshall(5, sp.edges)
    dev = float(np.max(np.abs(sp.vertex_distances - ref)))
    return dev <= 1e-12, f"max deviation from Floyd-Warshall {dev:.1e}"


# -- flows ------------------------------------------------------------------------------


def check_exponential_flow(rng):
    E = EuclideanSpace(1)
    fl = ode_flow(LinearField(1.0), E, 100)
    X = rng.uniform(-2, 2, (20, 1))
    taus = rng.uniform(0, 0.5, 20)
    err = max(abs(fl(1.0, tau, X[i:i + 1])[0, 0] - X[i, 0] * math.exp(1.0 - tau))
              for i, tau in enumerate(taus))
    err = max(err, abs(fl(1.0, 0.0, [[1.0]])[0, 0] - math.e))
    return err <= 1e-6, f"max |X - x e^(t - tau)| = {err:.1e}"


def check_cocycle(rng):
    E = EuclideanSpace(1)
    X = rng.uniform(-2, 2, (50, 1))
    r_exp = cocycle_residual(ode_flow(LinearField(1.0), E, 100), 1.0, 0.5, 0.0, X)
    r_const = cocycle_residual(ode_flow(ConstantField(1.0), E, 100), 0.9, 0.3, 0.1, X)
    r_id = cocycle_residual(IdentityFlow(E), 1.0, 0.4, 0.0, X)
    ok = r_exp <= 1e-8 and r_const <= 1e-12 and r_id == 0.0
    return ok, f"exp {r_exp:.1e}, constant {r_const:.1e}, identity {r_id:.1e}"


def check_round_trip(rng):
    E = EuclideanSpace(2)
    A = np.array([[0.0, 1.0], [-1.0, 0.2]])
    fl = ode_flow(LinearField(A, [0.3, -0.1]), E, 100)
    X = rng.uniform(-1, 1, (50, 2))
    back = fl(0.2, 1.0, fl(1.0, 0.2, X))
    err = float(np.max(np.linalg.norm(back - X, axis=1)))
    return err <= 1e-6, f"max round-trip error {err:.1e}"


def check_lipschitz(rng):
    E = EuclideanSpace(1)
    fl = ode_flow(LinearField(1.0), E, 100)
    X1, X2 = rng.uniform(-2, 2, (50, 1)), rng.uniform(-2, 2, (50, 1))
    r = empirical_lipschitz(fl, 1.0, 0.0, X1, X2)
    C = CircleSpace()
    rot = RotationFlow(C, 1.3)
    Y1, Y2 = C.sample(rng, 50), C.sample(rng, 50)
    r_rot = empirical_lipschitz(rot, 2.0, 0.0, Y1, Y2)
    ok = r <= math.e * (1 + 1e-6) and abs(r_rot - 1.0) <= 1e-9
    return ok, f"ode ratio {r:.6f} (bound e), rotation ratio {r_rot:.12f}"


def check_graph_drift(rng):
    G = GraphSpace(3, [(0, 1, 1.0), (1, 2, 1.0)])
    absorb = GraphDriftFlow(G, 1.0, "absorb")
    end = absorb(1.0, 0.0, [[0, 0.4]])
    d_end = G.distance(end[0], G.vertex_point(1))
    route = GraphDriftFlow(G, 1.0, "route", {1: 1})
    moved = route(1.0, 0.0, [[0, 0.4]])
    d_route = G.distance(moved[0], G.point(1, 0.4))
    return d_end == 0.0 and d_route <= 1e-12, f"absorbed at vertex ({d_end:g}), routed ({d_route:.1e})"


# -- linear -----------------------------------------------------------------------------


def _cfg(quadrature, **kw):
    return SolverConfig(quadrature=quadrature, **kw)


def check_pure_transport(rng, quadrature="left"):
    E = EuclideanSpace(1)
    model = ModelFunctions(E, flow=ode_flow(ConstantField(1.0), E, 128))
    mu0 = AtomicMeasure(E, [[0.0], [0.25]], [1.0, 0.5])
    cfg = _cfg(quadrature)
    path, _ = solve_linear(mu0, model, cfg)
    ref = [AtomicMeasure(E, mu0.locations + t, mu0.weights) for t in cfg.grid()]
    err = max(flat_distance(a, b) for a, b in zip(path.snapshots, ref))
    return err <= 1e-12, f"sup flat distance to push-forward {err:.1e}"


def check_constant_growth(rng, quadrature="left"):
    E = EuclideanSpace(1)
    c0, m0 = 0.7, 1.5
    model = ModelFunctions(E, growth=ConstantGrowth(c0))
    cfg = _cfg(quadrature)
    path, _ = solve_linear(AtomicMeasure.dirac(E, 0.0, m0), model, cfg)
    grid = cfg.grid()
    discrete = m0 * np.exp(c0 * cfg.dt) ** np.arange(grid.size)
    err_d = float(np.max(np.abs(path.masses() - discrete)))
    err_c = float(np.max(np.abs(path.masses() - m0 * np.exp(c0 * grid))))
    ok = err_d <= 1e-9 and err_c <= 2 * cfg.dt
    return ok, f"vs discrete exponential {err_d:.1e}, vs continuum {err_c:.1e} (2dt = {2 * cfg.dt:g})"


def check_two_state(rng, quadrature="left"):
    D = DiscreteSpace(2, labels=["A", "B"])
    cfg = _cfg(quadrature)
    grid = cfg.grid()
    A = AtomicMeasure.dirac(D, "A")
    jump = TransitionKernel(D, [[0.0, 1.0], [0.0, 0.0]])

    def split(path):
        mA = np.array([float(np.sum(s.weights[s.locations == 0])) for s in path.snapshots])
        mB = np.array([float(np.sum(s.weights[s.locations == 1])) for s in path.snapshots])
        return mA, mB

    # pure birth into B: m_A = 1, m_B = t
    mA, mB = split(solve_linear(A, ModelFunctions(D, kernel=jump), cfg)[0])
    err_birth = max(float(np.max(np.abs(mA - 1.0))), float(np.max(np.abs(mB - grid))))
    # switching that removes mass from A: m_A = e^{-t}, m_B = 1 - e^{-t}
    loss = FunctionGrowth(lambda t, X, mu: np.where(X == 0, -1.0, 0.0), 1.0, 1.0)
    mA, mB = split(solve_linear(A, ModelFunctions(D, growth=loss, kernel=jump), cfg)[0])
    err_switch = max(float(np.max(np.abs(mA - np.exp(-grid)))),
                     float(np.max(np.abs(mB - (1 - np.exp(-grid))))))
    ok = max(err_birth, err_switch) <= 3 * cfg.dt
    return ok, f"birth error {err_birth:.1e}, switching error {err_switch:.1e} (3dt = {3 * cfg.dt:g})"


def contraction_model():
    D = DiscreteSpace(2, labels=["A", "B"])
    return ModelFunctions(D, growth=FunctionGrowth(lambda t, X, mu: np.where(X == 0, 0.3, -0.2), 0.3, 0.5),
                          kernel=TransitionKernel(D, [[0.0, 1.5], [0.8, 0.0]]))


def check_contraction(rng, quadrature="left"):
    model = contraction_model()
    cfg = _cfg(quadrature, tol=1e-13)
    path, diag = solve_linear(AtomicMeasure.dirac(model.space, "A"), model, cfg)
    r = diag.residuals
    worst = max((r[i + 1] - 0.5 * r[i] for i in range(len(r) - 1)), default=0.0)
    ratios = [r[i + 1] / r[i] for i in range(len(r) - 1) if r[i] > 0]
    return worst <= 1e-9, (f"{len(r)} iterations, max ratio {max(ratios, default=0.0):.3f}, "
                           f"max excess over 0.5 r_m {worst:.1e}")


def check_eta_zero_two_iterations(rng, quadrature="left"):
    E = EuclideanSpace(1)
    model = ModelFunctions(E, growth=ConstantGrowth(0.3), influx=ConstantInflux(E, 0.5, 1.0),
                           flow=ode_flow(ConstantField(0.5), E, 128))
    _, diag = solve_linear(AtomicMeasure.dirac(E, 0.0), model, _cfg(quadrature))
    return diag.iterations == 2, f"{diag.iterations} iterations"


def check_linearity(rng, quadrature="left"):
    E = EuclideanSpace(1)
    model = ModelFunctions(E, growth=FunctionGrowth(lambda t, X, mu: 0.5 * np.cos(X[:, 0]), 0.5, 0.5),
                           kernel=PointMutationKernel(E, 0.5, lambda X: X + 0.125, 1.0),
                           flow=ode_flow(ConstantField(1.0), E, 128))
    cfg = _cfg(quadrature)
    mu, nu = AtomicMeasure.dirac(E, 0.0), AtomicMeasure.dirac(E, 0.5, 2.0)
    a, b = 0.7, 1.3
    p_mu, _ = solve_linear(mu, model, cfg)
    p_nu, _ = solve_linear(nu, model, cfg)
    p_mix, _ = solve_linear(add(a * mu, b * nu), model, cfg)
    combo = MeasurePath(p_mu.grid, [add(a * x, b * y) for x, y in zip(p_mu.snapshots, p_nu.snapshots)])
    err = sup_flat_distance(p_mix, combo)
    return err <= 1e-9, f"sup flat distance {err:.1e}"


# -- nonlinear --------------------------------------------------------------------------


def check_logistic(rng, quadrature="left"):
    E = EuclideanSpace(1)
    model = ModelFunctions(E, growth=LogisticGrowth(1.0, 1.0))
    cfg = _cfg(quadrature, outer_tol=1e-8)
    path, diag = solve_nonlinear(AtomicMeasure.dirac(E, 0.0, 0.1), model, cfg)
    m = path.masses()[-1]
    err = abs(m - float(logistic_mass(1.0, 0.1, 1.0, 1.0)))
    ok = err <= 2 * cfg.dt and diag.outer_iterations <= 25
    return ok, f"m(1) = {m:.6f}, error {err:.1e}, {diag.outer_iterations} outer iterations"


def check_aggregation(rng, quadrature="left"):
    E = EuclideanSpace(1)
    model = ModelFunctions(E, flow=ode_flow(AggregationField(1.0, measure_lip=1.0), E, 128))
    path, diag = solve_nonlinear(AtomicMeasure(E, [[-1.0], [1.0]], [1.0, 1.0]), model, _cfg(quadrature))
    com = [float(s.weights @ s.locations[:, 0] / s.mass) for s in path.snapshots]
    drift = max(abs(c - com[0]) for c in com)
    gap = float(np.ptp(path.snapshots[-1].locations[:, 0]))
    ok = drift <= 1e-8 and gap < 2.0 and diag.outer_iterations <= 25
    return ok, f"centre-of-mass drift {drift:.1e}, final spread {gap:.4f}"


def check_freeze_noop(rng, quadrature="left"):
    E = EuclideanSpace(1)
    model = ModelFunctions(E, growth=ConstantGrowth(0.4), kernel=PointMutationKernel(E, 0.5, lambda X: X + 0.25, 1.0))
    cfg = _cfg(quadrature)
    mu0 = AtomicMeasure.dirac(E, 0.0)
    p_nl, diag = solve_nonlinear(mu0, model, cfg)
    p_l, _ = solve_linear(mu0, model, cfg)
    err = sup_flat_distance(p_nl, p_l)
    return diag.outer_iterations == 2 and err <= 1e-12, f"{diag.outer_iterations} outer iterations, gap {err:.1e}"


def check_influx_stability(rng, quadrature="left"):
    E = EuclideanSpace(1)
    eps = 0.05
    ma = ModelFunctions(E, growth=ConstantGrowth(0.3), influx=ConstantInflux(E, 0.0, 1.0))
    mb = ModelFunctions(E, growth=ConstantGrowth(0.3), influx=ConstantInflux(E, 0.0, 1.0 + eps))
    rep = stability_experiment(ma, mb, AtomicMeasure.dirac(E, 0.5), _cfg(quadrature))
    bound = rep.constant * eps * 1.0
    ok = rep.sup_distance <= bound * (1 + 1e-6)
    return ok, f"sup distance {rep.sup_distance:.4e} <= C_M eps T = {bound:.4e}"


# -- pde --------------------------------------------------------------------------------


def pde_battery():
    """Transport, growth and mutation scenarios on the line: ``(name, model, mu0)``."""
    E = EuclideanSpace(1)
    drift = ode_flow(ConstantField(1.0), E, 128)
    return [
        ("transport", ModelFunctions(E, flow=drift), AtomicMeasure.dirac(E, 0.0)),
        ("growth", ModelFunctions(E, growth=ConstantGrowth(1.0)), AtomicMeasure.dirac(E, 0.25)),
        ("mutation", ModelFunctions(
            E, growth=FunctionGrowth(lambda t, X, mu: 0.5 * np.cos(X[:, 0]), 0.5, 0.5),
            kernel=PointMutationKernel(E, 0.5, lambda X: X + 0.125, 1.0),
            influx=ConstantInflux(E, 0.0, 0.25), flow=drift),
         AtomicMeasure(E, [[0.0], [0.5]], [1.0, 0.5])),
    ]


def check_pde_orders(rng, quadrature="left"):
    lines, ok = [], True
    for name, model, mu0 in pde_battery():
        rep = consistency_report(lambda dt: solve_linear(mu0, model, _cfg(quadrature, dt=dt))[0], model)
        order = rep.combined_order
        good = order is not None and 0.8 <= order <= 1.3
        ok &= good
        lines.append(f"{name} {order:.3f}" if order is not None else f"{name} n/a")
    return ok, "fitted orders: " + ", ".join(lines)


def check_pde_derivative(rng, quadrature="left"):
    worst = 0.0
    cfg = _cfg(quadrature)
    for _, model, mu0 in pde_battery():
        path, _ = solve_linear(mu0, model, cfg)
        for tf in fixture_test_functions():
            for t in path.grid[1:-1]:
                lhs, rhs = derivative_check(path, model, tf, t)
                worst = max(worst, abs(lhs - rhs))
    return worst <= 5 * cfg.dt, f"max |central difference - generator| {worst:.2e} (5dt = {5 * cfg.dt:g})"


def check_pde_split(rng, quadrature="left"):
    worst = 0.0
    cfg = _cfg(quadrature)
    for _, model, mu0 in pde_battery():
        path, _ = solve_linear(mu0, model, cfg)
        for tf in fixture_test_functions():
            worst = max(worst, *split_check(mu0, path, model, cfg, tf).values())
    return worst <= 1e-10, f"max split discrepancy {worst:.1e}"


CHECKS = {
    "flat": [("lp_vs_grid_oracle", check_flat_oracle), ("metric_axioms", check_metric_axioms),
             ("dirac_formula", check_dirac_formula), ("neighborhood_mass_gap", check_neighborhood_gap),
             ("homogeneity_and_dominance", check_homogeneity_dominance),
             ("graph_vs_floyd_warshall", check_graph_distances)],
    "flows": [("exponential_flow", check_exponential_flow), ("cocycle", check_cocycle),
              ("round_trip", check_round_trip), ("lipschitz_bounds", check_lipschitz),
              ("graph_drift", check_graph_drift)],
    "linear": [("pure_transport", check_pure_transport), ("constant_growth", check_constant_growth),
               ("two_state_mutation", check_two_state), ("contraction", check_contraction),
               ("eta_zero_two_iterations", check_eta_zero_two_iterations), ("linearity", check_linearity)],
    "nonlinear": [("logistic", check_logistic), ("aggregation", check_aggregation),
                  ("freeze_is_noop", check_freeze_noop), ("influx_stability", check_influx_stability)],
    "pde": [("residual_order", check_pde_orders), ("derivative_check", check_pde_derivative),
            ("split_identities", check_pde_split)],
}

QUADRATURE_AWARE = {"linear", "nonlinear", "pde"}


def run_suite(suite: str, seed: int = 42, quadrature: str = "left") -> list:
    if suite not in CHECKS:
        raise KeyError(suite)
    results = []
    for name, fn in CHECKS[suite]:
        rng = np.random.default_rng(seed)
        try:
            ok, detail = fn(rng, quadrature) if suite in QUADRATURE_AWARE else fn(rng)
        except (ConvergenceError, ArithmeticError) as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(suite, name, bool(ok), detail))
    return results


def format_table(results) -> str:
    width = max((len(r.name) for r in results), default=4)
    lines = [f"{'check':<{width}}  result  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.ok else 'FAIL':<6}  {r.detail}")
    return "\n".join(lines)
