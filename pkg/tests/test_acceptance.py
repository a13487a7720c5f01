"""Acceptance suite: one check per criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""

import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
import oracles  # noqa: E402
from tdglobal import boundary as bd  # noqa: E402
from tdglobal import fem, gcp, presets, reconstruct as rc, sim1d  # noqa: E402
from tdglobal import mesh as M  # noqa: E402

SCALE = oracles.A + oracles.B  # 3e4 Pa
WINDOW = presets.WINDOW
RESULTS = {}


def record(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} -- {detail}"
    RESULTS[number] = line
    print(line)
    return passed


def ctx_for(name):
    return gcp.GcpContext(presets.get_preset(name).flow, window=WINDOW)


def probe_points(n, seed, min_abs=None):
    """Deterministic points in the diagram; optionally away from the LIN zero level set."""
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < n:
        s1 = rng.random()
        s3 = rng.random() * (1 - s1)
        if min_abs is None or abs(oracles.lin_closed_form(s1, s3)) >= min_abs:
            pts.append((s1, s3))
    return np.array(pts).T


# --- criteria -----------------------------------------------------------------


def criterion_1():
    t0 = time.perf_counter()
    ctx = ctx_for("LIN")
    s1, s3 = probe_points(25, seed=11, min_abs=500.0)
    p = np.random.default_rng(12).uniform(WINDOW.p_min, WINDOW.p_max, 25)
    got = gcp.pcg(ctx, s1, s3, p)
    elapsed = time.perf_counter() - t0
    exact = oracles.lin_closed_form(s1, s3)
    rk4 = np.array([oracles.beta_oracle(a, b, c) for a, b, c in zip(s1, s3, p)])
    rel = float(np.max(np.abs(got - exact) / np.abs(exact)))
    rel_rk4 = float(np.max(np.abs(rk4 - exact) / np.abs(exact)))
    ok = rel < 1e-6 and rel_rk4 < 1e-6 and elapsed < 5.0
    return record(1, "LIN closed-form recovery", ok,
                  f"max rel err {rel:.2e} (RK4 oracle {rel_rk4:.2e}), {elapsed:.2f} s")


def criterion_2():
    s1, s3 = probe_points(25, seed=21)
    p = np.full(25, 1e7)
    tol = 1e-6 * SCALE
    spreads = {}
    for name in ("LIN", "GAS"):
        spreads[name] = float(np.max(gcp.td_residual_paths(ctx_for(name), s1, s3, p, n_paths=20, seed=22)))
    corey = ctx_for("COREY")
    lower, upper = gcp.extreme_paths(0.4, 0.3)
    detect = abs(gcp.integrate_beta(corey, lower, 1e7) - gcp.integrate_beta(corey, upper, 1e7))
    ok = spreads["LIN"] < tol and spreads["GAS"] < tol and detect > 1e-3 * SCALE
    return record(2, "path independence", ok,
                  f"spread LIN {spreads['LIN']:.2e} Pa, GAS {spreads['GAS']:.2e} Pa (< {tol:.0e}); "
                  f"Corey axis-path gap {detect:.1f} Pa (> {1e-3 * SCALE:.0f})")


def criterion_3():
    worst = {}
    ok = True
    wog = None
    for name in presets.PRESETS:
        rep = gcp.stability_report(ctx_for(name), n_side=50)
        worst[name] = rep.min_one_minus
        ok &= rep.min_one_minus > 0
        if name == "WOG":
            wog = rep
    edge = wog.s3 == 0.0
    wog_range = bool(np.all(wog.dpdp >= -1e-12) and np.all(wog.dpdp < 1.0))
    wog_edge = float(np.max(np.abs(wog.dpdp[:, edge])))
    ok = ok and wog_range and wog_edge < 1e-12
    return record(3, "strict positivity", ok,
                  f"min(1 - dPcg/dp) over presets {min(worst.values()):.4f}; WOG slope in "
                  f"[{wog.dpdp.min():.2e}, {wog.dpdp.max():.2e}], water-oil edge max {wog_edge:.1e}")


def criterion_4():
    ctx = ctx_for("GAS")
    rng = np.random.default_rng(41)
    s1 = rng.random(100)
    s3 = rng.random(100) * (1 - s1)
    p = rng.uniform(WINDOW.p_min, WINDOW.p_max, 100)
    ode = gcp.dpcg_dp(ctx, s1, s3, p)
    quad = gcp.dpcg_dp_quadrature(ctx, s1, s3, p)
    nz = np.abs(quad) > 1e-12
    rel = float(np.max(np.abs(ode[nz] - quad[nz]) / np.abs(quad[nz])))
    zero_ok = bool(np.all(np.abs(ode[~nz]) < 1e-12))
    return record(4, "two-route derivative consistency", rel < 1e-6 and zero_ok,
                  f"max rel diff {rel:.2e} over {int(nz.sum())} points ({int((~nz).sum())} on a zero-slope edge)")


def criterion_5():
    lin = presets.get_preset("LIN")
    nodes = WINDOW.nodes()
    good = bd.compatibility_residual(lin.dataset, lin.flow.phases, nodes)
    pert = lin.dataset.scaled("13", 1, 1.1)
    bad = bd.compatibility_residual(pert, lin.flow.phases, nodes)
    min_bad = float(np.min(np.abs(bad.residuals)))
    ok = good.max_abs < 1e-8 * SCALE and min_bad > 1e-3 * SCALE
    return record(5, "TD-compatibility", ok,
                  f"LIN max residual {good.max_abs:.2e} Pa at {len(nodes)} nodes; perturbed min {min_bad:.1f} Pa")


FEM_LEVELS = (8, 16, 32, 64)


def _study(solve, exact):
    t0 = time.perf_counter()
    errs = [fem.l2_error(solve(M.make_mesh(n)), exact) for n in FEM_LEVELS]
    orders = fem.observed_orders([1.0 / n for n in FEM_LEVELS], errs)
    return np.array(errs), orders, time.perf_counter() - t0


def criterion_6():
    def dirichlet(f):
        return lambda e, t: f(*oracles.edge_s(e, t))

    lap = _study(lambda m: fem.solve_laplace(m, dirichlet(oracles.harmonic)), oracles.harmonic)
    lin = _study(lambda m: fem.solve_biharmonic(m, dirichlet(oracles.lin_closed_form), oracles.lin_normal),
                 oracles.lin_closed_form)
    cub = _study(lambda m: fem.solve_biharmonic(m, dirichlet(oracles.cubic), oracles.cubic_normal), oracles.cubic)
    # the LIN closed form is quadratic in the embedding, hence in the P2 space:
    # the error is roundoff at every level and has no convergence order
    mesh = M.make_mesh(FEM_LEVELS[-1])
    norm = fem.l2_error(fem.NodalField(mesh, np.zeros(M.lattice_size(2 * mesh.n)), order=2), oracles.lin_closed_form)
    lin_rel = lin[0] / norm
    lin_exact = bool(np.all(lin_rel < 1e-8))
    lin_ok = bool(np.all(lin[1] >= 1.5)) or (lin_exact and bool(np.all(cub[1] >= 1.5)))
    ok = bool(np.all(lap[1] >= 1.9)) and lin_ok and max(lap[2], lin[2], cub[2]) < 60
    return record(6, "FEM convergence", ok,
                  f"Laplace orders {np.round(lap[1], 3).tolist()} ({lap[2]:.1f} s); "
                  f"LIN biharmonic rel err {lin_rel.max():.1e} (orders {np.round(lin[1], 2).tolist()}, "
                  f"reproduced to roundoff, {lin[2]:.1f} s); "
                  f"x^3 biharmonic orders {np.round(cub[1], 3).tolist()} ({cub[2]:.1f} s)")


def criterion_7():
    lin = presets.get_preset("LIN")
    recon = rc.reconstruct(lin.dataset, lin.flow.phases, WINDOW.nodes(), n=16)
    rep = rc.verify_boundary_match(recon, n_probes=101, tol=1e-3)
    err = max(e["max_rel_error"] for e in rep["edges"].values())
    absent = max(e["absent_phase_max"] for e in rep["edges"].values())
    return record(7, "boundary honoring", rep["passed"],
                  f"max rel kr error {err:.2e}, max absent-phase kr {absent:.2e} (101 probes/edge, 5 nodes)")


def criterion_8():
    S1 = lambda x: 0.35 + 0.2 * np.sin(2 * np.pi * x)  # noqa: E731
    S3 = lambda x: 0.25 + 0.15 * np.cos(3 * x)  # noqa: E731
    P = lambda x: 1e7 + 4e5 * (0.5 - x) + 2e4 * np.sin(5 * x)  # noqa: E731
    x = (np.arange(64) + 0.5) / 64
    worst = {}
    for name in ("LIN", "GAS"):
        for g in (0.0, 9.81):
            rep = rc.flux_identity_check(ctx_for(name), S1, S3, P, x, gravity=g, dzdx=1.0)
            worst[(name, g)] = rep["max_rel_diff"]
    m = max(worst.values())
    return record(8, "flux identity", m < 1e-8,
                  "max rel diff " + ", ".join(f"{n}{'+g' if g else ''} {v:.1e}" for (n, g), v in worst.items()))


def criterion_9():
    lin = presets.get_preset("LIN")
    cfg = sim1d.CaseConfig()
    t0 = time.perf_counter()
    fld = gcp.build_field(ctx_for("LIN"), n_s=cfg.field_ns)
    rep200, _ = sim1d.run_compare(lin.flow, cfg, fld)
    runtime = time.perf_counter() - t0
    reps = [sim1d.run_compare(lin.flow, cfg.with_cells(n), fld)[0] for n in (50, 100)] + [rep200]
    l1 = np.array([r.l1_s1 + r.l1_s3 for r in reps])
    orders = np.log(l1[:-1] / l1[1:]) / np.log(2.0)
    decreasing = bool(np.all(np.diff(l1) < 0))
    ok = rep200.linf < 5e-3 and runtime < 60 and decreasing and bool(np.all(orders >= 1.0))
    return record(9, "simulator equivalence", ok,
                  f"Linf dS {rep200.linf:.2e} at 200 cells, {runtime:.1f} s; L1 dS {np.array2string(l1, precision=2)} "
                  f"at 50/100/200 cells, orders {np.round(orders, 3).tolist()} (required >= 1)")


def criterion_10():
    rng = np.random.default_rng(101)
    s1 = rng.random(1000)
    s3 = rng.random(1000) * (1 - s1)
    p = rng.uniform(WINDOW.p_min, WINDOW.p_max, 1000)
    worst = {}
    for name in presets.PRESETS:
        ctx = ctx_for(name)
        if not gcp.stability_report(ctx, n_side=10).slope_bounded:
            continue
        p2 = gcp.oil_from_global(ctx, s1, s3, p)
        res = gcp.global_from_oil(ctx, s1, s3, p2)
        worst[name] = float(np.max(np.abs(res.p - p))) if res.converged else np.inf
    m = max(worst.values())
    return record(10, "global/oil pressure round trip", m < 1e-6,
                  f"max |P - P'| {m:.1e} Pa on {', '.join(worst)}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{k}" for k in range(1, 11)])
def test_criterion(check):
    assert check(), RESULTS[int(check.__name__.split("_")[1])]


if __name__ == "__main__":
    outcome = [check() for check in CRITERIA]
    print(f"{sum(outcome)}/{len(outcome)} criteria pass")
    sys.exit(0 if all(outcome) else 1)
