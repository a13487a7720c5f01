"""Three-phase kr from an interpolated (P_cg, d) pair, and pipeline checks.

Given a P_cg field over the diagram, the fractional flows in global-pressure
variables are

    nu1 = (dP_cg/ds1) / Pc12'(s1),   nu3 = (dP_cg/ds3) / Pc32'(s3),   nu2 = 1 - nu1 - nu3

and with the total mobility field d the relative permeabilities follow as
kr_j = nu_j d / d_j(P_j), P_j = p - P_cg + Pc_j2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import boundary as bd
from . import fem
from . import gcp
from .fluids import PressureWindow
from .flows import FlowModel, Provenance, ThreePhaseKr
from .mesh import edge_point, make_mesh
from .twophase import CapillaryCurves, TwoPhaseDataset, check_ternary, write_csv

NU_CLAMP = 1e-3
SLOPE_EPS = 1e-12


class ReconstructionError(ValueError):
    pass


@dataclass
class NuResult:
    nu1: np.ndarray
    nu2: np.ndarray
    nu3: np.ndarray
    clamped: int = 0
    out_of_range: int = 0
    undefined: np.ndarray | None = None  # 0/0 points (flat field, flat Pc)
    singular: np.ndarray | None = None  # flat Pc under a sloped field

    @property
    def ok(self) -> bool:
        return self.out_of_range == 0 and not np.any(self.singular)


def _ratio(num, den, scale):
    flat_pc = np.abs(den) <= SLOPE_EPS * scale
    flat_field = np.abs(num) <= 1e-9 * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        nu = np.where(flat_pc, np.nan, num / np.where(flat_pc, 1.0, den))
    return nu, flat_pc & flat_field, flat_pc & ~flat_field


def nu_from_gradient(g1, g3, curves: CapillaryCurves, s1, s3, clamp: float = NU_CLAMP) -> NuResult:
    scale = max(curves.scale, 1.0)
    nu1, u1, x1 = _ratio(g1, curves.dpc12(s1), scale)
    nu3, u3, x3 = _ratio(g3, curves.dpc32(s3), scale)
    bad = 0
    clamped = 0
    out = []
    for nu in (nu1, nu3):
        finite = np.isfinite(nu)
        lo = finite & (nu < 0)
        hi = finite & (nu > 1)
        far = finite & ((nu < -clamp) | (nu > 1 + clamp))
        bad += int(np.sum(far))
        clamped += int(np.sum((lo | hi) & ~far))
        out.append(np.where(finite, np.clip(nu, 0.0, 1.0), nu))
    nu1, nu3 = out
    total = nu1 + nu3
    over = np.isfinite(total) & (total > 1.0)
    far = over & (total > 1.0 + clamp)
    bad += int(np.sum(far))
    clamped += int(np.sum(over & ~far))
    with np.errstate(invalid="ignore", divide="ignore"):
        nu1 = np.where(over, nu1 / total, nu1)
        nu3 = np.where(over, nu3 / total, nu3)
    nu2 = 1.0 - nu1 - nu3
    return NuResult(nu1, nu2, nu3, clamped, bad, u1 | u3, x1 | x3)


def fractional_from_pcg(pcg_field, curves: CapillaryCurves, s1, s3, clamp: float = NU_CLAMP) -> NuResult:
    """nu_j from the saturation gradient of a P_cg field (fixed pressure)."""
    s1, s3 = check_ternary(s1, s3)
    g1, g3 = pcg_field.gradient(s1, s3)
    return nu_from_gradient(g1, g3, curves, s1, s3, clamp)


def kr_from_pcg_d(pcg_field, d_field, phases, curves: CapillaryCurves, s1, s3, p, clamp: float = NU_CLAMP):
    """(kr1, kr2, kr3) and the nu result at fixed global pressure ``p``."""
    s1, s3 = check_ternary(s1, s3)
    nu = fractional_from_pcg(pcg_field, curves, s1, s3, clamp)
    d = d_field(s1, s3)
    if np.any(d <= 0):
        raise ReconstructionError("interpolated total mobility is not positive")
    p2 = p - pcg_field(s1, s3)
    d1 = phases[0].mobility(p2 + curves.pc12(s1))
    d2 = phases[1].mobility(p2)
    d3 = phases[2].mobility(p2 + curves.pc32(s3))
    return (nu.nu1 * d / d1, nu.nu2 * d / d2, nu.nu3 * d / d3), nu


# --- pipeline ------------------------------------------------------------------


@dataclass
class Reconstruction:
    """Interpolated fields at each pressure node plus the derived kr model."""

    dataset: TwoPhaseDataset = field(repr=False)
    phases: tuple = field(repr=False)
    n: int
    p_nodes: np.ndarray
    profiles: bd.EdgeProfiles = field(repr=False)
    pcg_fields: list = field(repr=False)
    d_fields: list = field(repr=False)

    @property
    def curves(self) -> CapillaryCurves:
        return self.dataset.curves

    def _blend(self, fn, s1, s3, p):
        """Evaluate ``fn(k, s1, s3)`` per node and interpolate linearly in p."""
        vals = [fn(k, s1, s3) for k in range(len(self.p_nodes))]
        if len(vals) == 1:
            return vals[0]
        p = np.broadcast_to(np.asarray(p, dtype=float), np.shape(s1))
        pn = self.p_nodes
        k = np.clip(np.searchsorted(pn, p, side="right") - 1, 0, len(pn) - 2)
        w = np.clip((p - pn[k]) / (pn[k + 1] - pn[k]), 0.0, 1.0)
        stacked = np.stack(vals)
        idx = np.indices(np.shape(s1))
        return (1 - w) * stacked[(k,) + tuple(idx)] + w * stacked[(k + 1,) + tuple(idx)]

    def kr_at(self, s1, s3, p=None):
        s1, s3 = np.broadcast_arrays(np.asarray(s1, dtype=float), np.asarray(s3, dtype=float))
        p = self.p_nodes[0] if p is None else p
        parts = [self._blend(lambda k, a, b, c=c: kr_from_pcg_d(self.pcg_fields[k], self.d_fields[k], self.phases,
                                                                  self.curves, a, b, self.p_nodes[k])[0][c],
                             s1, s3, p) for c in range(3)]
        return tuple(np.maximum(x, 0.0) for x in parts)

    def nu_at(self, s1, s3, k: int = 0) -> NuResult:
        return fractional_from_pcg(self.pcg_fields[k], self.curves, s1, s3)

    def kr_model(self) -> ThreePhaseKr:
        return ThreePhaseKr(lambda s1, s3, p: self.kr_at(s1, s3, p), Provenance.RECONSTRUCTED,
                            name=f"reconstructed(n={self.n})", pressure_dependent=True)

    def flow_model(self, window: PressureWindow | None = None) -> FlowModel:
        return FlowModel(self.kr_model(), self.phases, self.curves, window)

    def export_csv(self, path, n_side: int = 21):
        s1, s3 = gcp.barycentric_grid(n_side)
        rows = []
        for k, p in enumerate(self.p_nodes):
            (k1, k2, k3), nu = kr_from_pcg_d(self.pcg_fields[k], self.d_fields[k], self.phases, self.curves, s1, s3, p)
            rows += list(zip(s1, s3, np.full(len(s1), p), k1, k2, k3, nu.nu1, nu.nu3))
        write_csv(path, ["s1", "s3", "p", "kr1", "kr2", "kr3", "nu1", "nu3"], rows)


def reconstruct(dataset: TwoPhaseDataset, phases, p_nodes, n: int = 16, rel_tol: float = 1e-8) -> Reconstruction:
    """Boundary data -> biharmonic P_cg and harmonic d at each pressure node."""
    p_nodes = np.atleast_1d(np.asarray(p_nodes, dtype=float))
    profiles = bd.edge_beta(dataset, phases, p_nodes)
    mesh = make_mesh(n)
    pcg_fields, d_fields = [], []
    for p in p_nodes:
        pcg_fields.append(fem.solve_biharmonic(
            mesh,
            lambda e, t, p=p: bd.dirichlet_pcg(profiles, e, t, p, rel_tol),
            lambda e, t, p=p: bd.neumann_pcg(dataset, profiles, e, t, p, rel_tol),
        ))
        d_fields.append(fem.solve_laplace(
            mesh, lambda e, t, p=p: bd.dirichlet_mobility(dataset, profiles, e, t, p, rel_tol)))
    return Reconstruction(dataset, tuple(phases), n, p_nodes, profiles, pcg_fields, d_fields)


# --- checks --------------------------------------------------------------------


def verify_boundary_match(recon: Reconstruction, n_probes: int = 101, tol: float = 1e-3) -> dict:
    """Reconstructed kr on each edge vs the input two-phase tables."""
    t = np.linspace(0.0, 1.0, n_probes)
    dataset = recon.dataset
    present = {"12": (1, 2), "13": (1, 3), "23": (3, 2)}
    edges = {}
    ok = True
    for k, p in enumerate(recon.p_nodes):
        for edge, (pa, pb) in present.items():
            s1, s3 = edge_point(edge, t)
            coord = s3 if edge == "23" else s1
            (k1, k2, k3), _ = kr_from_pcg_d(recon.pcg_fields[k], recon.d_fields[k], recon.phases, recon.curves, s1, s3, p)
            kr = {1: k1, 2: k2, 3: k3}
            entry = edges.setdefault(edge, {"max_rel_error": 0.0, "absent_phase_max": 0.0})
            for ph in (pa, pb):
                ref = dataset.kr_edge(edge, ph, coord)
                err = float(np.max(np.abs(kr[ph] - ref)) / max(float(np.max(np.abs(ref))), 1e-300))
                entry["max_rel_error"] = max(entry["max_rel_error"], err)
            absent = ({1, 2, 3} - {pa, pb}).pop()
            entry["absent_phase_max"] = max(entry["absent_phase_max"], float(np.max(np.abs(kr[absent]))))
    for entry in edges.values():
        entry["passed"] = entry["max_rel_error"] < tol and entry["absent_phase_max"] < tol
        ok &= entry["passed"]
    return {"passed": bool(ok), "tolerance": tol, "n_probes": n_probes, "edges": edges}


def verify_td(recon: Reconstruction, n_probes: int = 10, n_paths: int = 10, seed: int = 0,
              rel_tol: float = 1e-5) -> dict:
    """Path spread of the reconstructed kr model at random interior probes."""
    model = recon.flow_model()
    ctx = gcp.GcpContext(model)
    rng = np.random.default_rng(seed)
    s1 = rng.uniform(0.05, 0.9, n_probes)
    s3 = rng.uniform(0.0, 1.0, n_probes) * (1.0 - s1) * 0.95
    p = np.full(n_probes, recon.p_nodes[len(recon.p_nodes) // 2])
    spread = np.atleast_1d(gcp.td_residual_paths(ctx, s1, s3, p, n_paths=n_paths, seed=seed))
    scale = max(recon.curves.scale, 1.0)
    return {
        "max_spread_pa": float(np.max(spread)),
        "tolerance_pa": rel_tol * scale,
        "passed": bool(np.max(spread) < rel_tol * scale),
        "n_probes": n_probes,
    }


def fd5(fn, x, h):
    """Five-point centred first derivative."""
    return (fn(x - 2 * h) - 8 * fn(x - h) + 8 * fn(x + h) - fn(x + 2 * h)) / (12 * h)


def flux_identity_check(ctx: gcp.GcpContext, S1, S3, P, x, gravity: float = 0.0, dzdx: float = 0.0,
                        h: float = 1e-3, evaluator=None) -> dict:
    """Compare the oil-pressure and global-pressure total flux expressions.

    ``S1``, ``S3`` and ``P`` are callables of position; ``x`` are sample
    positions. The oil-pressure gradient is obtained by differentiating
    P2(x) = P - P_cg(S, P) numerically, never from the identity itself.
    """
    model = ctx.model
    curves = model.curves
    x = np.asarray(x, dtype=float)
    if evaluator is None:
        tight = ctx.tightened(1e-3)

        def evaluator(a, b, c):
            return gcp.pcg_and_slope(tight, a, b, c)

    def p2_of(xx):
        return P(xx) - evaluator(S1(xx), S3(xx), P(xx))[0]

    s1, s3, p = S1(x), S3(x), P(x)
    pc, slope = evaluator(s1, s3, p)
    p2 = p - pc
    a, pj = model.phase_terms(s1, s3, p2, p)
    lam = a[0] + a[1] + a[2]
    f1, f3 = a[0] / lam, a[2] / lam
    rho = model.density(s1, s3, p2, p)
    dp2 = fd5(p2_of, x, h)
    dpc12 = fd5(lambda xx: curves.pc12(S1(xx)), x, h)
    dpc32 = fd5(lambda xx: curves.pc32(S3(xx)), x, h)
    dp = fd5(P, x, h)
    q_oil = -lam * (dp2 + f1 * dpc12 + f3 * dpc32 - rho * gravity * dzdx)
    q_glob = -lam * ((1.0 - slope) * dp - rho * gravity * dzdx)
    denom = np.maximum(np.maximum(np.abs(q_oil), np.abs(q_glob)), 1e-300)
    rel = np.abs(q_oil - q_glob) / denom
    both_zero = (np.abs(q_oil) < 1e-300) & (np.abs(q_glob) < 1e-300)
    rel = np.where(both_zero, 0.0, rel)
    return {
        "max_rel_diff": float(np.max(rel)),
        "q_oil": q_oil,
        "q_global": q_glob,
        "stable": bool(np.all(np.abs(slope) < 1.0)),
        "n": int(len(x)),
    }
