"""Edge-restricted beta ODEs, the TD-compatibility test, and boundary data.

Edges are parameterised as C12(t) = (1 - t, 0), C23(t) = (0, t) and
C13(t) = (1 - t, t). Along each edge only two phases flow, so the two-phase
fractional flows built from the edge tables drive the ODE:

    edge 12:  beta' = -nu1 Pc12'(1 - t),                  beta(0) = 0
    edge 23:  beta' = +nu3 Pc32'(t),                      beta(0) = beta12(1)
    edge 13:  beta' = -nu1 Pc12'(1 - t) + nu3 Pc32'(t),   beta(0) = 0

with the nu's evaluated at oil pressure p - beta. The two routes to the gas
corner must agree: beta23(1) = beta13(1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp

from .gcp import ODEFailure
from .mesh import SQRT3, edge_point
from .twophase import EDGES, TwoPhaseDataset, write_csv


class CompatibilityError(ValueError):
    """Two-phase data admit no TD interpolant (gas-corner mismatch)."""


def _edge_terms(dataset: TwoPhaseDataset, phases, edge: str, t, p2):
    """Two-phase mobility terms (a_first, a_second, nu1, nu3) on an edge."""
    curves = dataset.curves
    s1, s3 = edge_point(edge, t)
    d1, d2, d3 = phases
    if edge == "12":
        a = dataset.kr_edge("12", 1, s1) * d1.mobility(p2 + curves.pc12(s1))
        b = dataset.kr_edge("12", 2, s1) * d2.mobility(p2)
        lam = a + b
        return lam, a / lam, np.zeros_like(lam)
    if edge == "23":
        a = dataset.kr_edge("23", 3, s3) * d3.mobility(p2 + curves.pc32(s3))
        b = dataset.kr_edge("23", 2, s3) * d2.mobility(p2)
        lam = a + b
        return lam, np.zeros_like(lam), a / lam
    if edge == "13":
        a = dataset.kr_edge("13", 1, s1) * d1.mobility(p2 + curves.pc12(s1))
        b = dataset.kr_edge("13", 3, s1) * d3.mobility(p2 + curves.pc32(s3))
        lam = a + b
        return lam, a / lam, b / lam
    raise ValueError(f"unknown edge {edge!r}")


def edge_fractional_flows(dataset, phases, edge, t, p2):
    """(nu1, nu3) of the two-phase system on ``edge`` at oil pressure ``p2``."""
    lam, nu1, nu3 = _edge_terms(dataset, phases, edge, t, p2)
    if np.any(lam <= 0):
        raise ZeroDivisionError(f"degenerate two-phase mobility on edge {edge}")
    return nu1, nu3


def _edge_speed(dataset, edge, t):
    """(Pc12'(s1) * ds1/dt, Pc32'(s3) * ds3/dt) along an edge."""
    curves = dataset.curves
    s1, s3 = edge_point(edge, t)
    w1 = -curves.dpc12(s1) if edge in ("12", "13") else np.zeros_like(np.asarray(t, float))
    w3 = curves.dpc32(s3) if edge in ("23", "13") else np.zeros_like(np.asarray(t, float))
    return w1, w3


def _integrate_edge(dataset, phases, edge, p, beta0, rtol, atol):
    p = np.asarray(p, dtype=float)

    def rhs(t, beta):
        tt = np.full_like(beta, t)
        nu1, nu3 = edge_fractional_flows(dataset, phases, edge, tt, p - beta)
        w1, w3 = _edge_speed(dataset, edge, tt)
        return nu1 * w1 + nu3 * w3

    y0 = np.broadcast_to(np.asarray(beta0, dtype=float), p.shape).copy()
    root = np.sqrt(len(p))
    sol = solve_ivp(rhs, (0.0, 1.0), y0, method="RK45", rtol=rtol / root, atol=atol / root, dense_output=True)
    if sol.status != 0:
        raise ODEFailure(f"edge {edge} ODE failed: {sol.message}")
    return sol.sol


@dataclass
class EdgeProfiles:
    """Edge beta solutions at a set of pressure nodes, evaluable at any t."""

    dataset: TwoPhaseDataset = field(repr=False)
    phases: tuple = field(repr=False)
    p_nodes: np.ndarray
    solutions: dict = field(repr=False)  # edge -> dense solution, vector over p_nodes

    def index(self, p) -> int:
        k = np.flatnonzero(np.isclose(self.p_nodes, p, rtol=0, atol=1e-9 * max(1.0, abs(float(p)))))
        if len(k) == 0:
            raise KeyError(f"pressure {p} is not a profile node")
        return int(k[0])

    def beta(self, edge: str, t, p=None, k: int | None = None):
        """beta along ``edge``; selects the pressure node by value ``p`` or index ``k``."""
        if k is None:
            k = 0 if p is None else self.index(p)
        t = np.asarray(t, dtype=float)
        return self.solutions[edge](np.clip(t.ravel(), 0.0, 1.0))[k].reshape(t.shape)

    def end_values(self):
        return {e: self.solutions[e](1.0) for e in EDGES}

    @property
    def residual(self) -> np.ndarray:
        """beta23(1) - beta13(1) at every pressure node."""
        return self.solutions["23"](1.0) - self.solutions["13"](1.0)


def edge_beta(dataset: TwoPhaseDataset, phases, p, rtol: float = 1e-11, atol: float = 1e-11) -> EdgeProfiles:
    """Integrate the three edge ODEs for each pressure value in ``p``.

    ``atol`` is relative to the capillary scale.
    """
    p_nodes = np.atleast_1d(np.asarray(p, dtype=float))
    scale = max(dataset.curves.scale, 1.0)
    a = atol * scale
    sol12 = _integrate_edge(dataset, phases, "12", p_nodes, 0.0, rtol, a)
    sol23 = _integrate_edge(dataset, phases, "23", p_nodes, sol12(1.0), rtol, a)
    sol13 = _integrate_edge(dataset, phases, "13", p_nodes, 0.0, rtol, a)
    return EdgeProfiles(dataset, tuple(phases), p_nodes, {"12": sol12, "23": sol23, "13": sol13})


def integral_form(dataset: TwoPhaseDataset, phases, p: float) -> dict | None:
    """Quadrature form of the compatibility condition (incompressible data only).

    Without compressibility the two-phase fractional flows do not depend on
    beta, so both sides are plain integrals of data.
    """
    if any(ph.is_compressible for ph in phases):
        return None

    def integrand(edge):
        def f(t):
            nu1, nu3 = edge_fractional_flows(dataset, phases, edge, np.array([t]), np.array([p]))
            w1, w3 = _edge_speed(dataset, edge, np.array([t]))
            return float(nu1[0] * w1[0] + nu3[0] * w3[0])
        return f

    kw = {"epsabs": 1e-13, "epsrel": 1e-13, "limit": 200}
    via_oil = quad(integrand("12"), 0, 1, **kw)[0] + quad(integrand("23"), 0, 1, **kw)[0]
    via_water = quad(integrand("13"), 0, 1, **kw)[0]
    return {"via_oil_corner": via_oil, "via_water_gas_edge": via_water, "residual": via_oil - via_water}


@dataclass
class CompatibilityReport:
    p_nodes: np.ndarray
    residuals: np.ndarray
    tolerance: float
    integral: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.residuals) < self.tolerance))

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.residuals)))

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tolerance_pa": self.tolerance,
            "max_abs_residual_pa": self.max_abs,
            "nodes": [{"p": float(p), "residual_pa": float(r)} for p, r in zip(self.p_nodes, self.residuals)],
            "integral_form": self.integral,
        }


def compatibility_residual(dataset: TwoPhaseDataset, phases, p_nodes, rel_tol: float = 1e-8,
                           profiles: EdgeProfiles | None = None) -> CompatibilityReport:
    profiles = profiles or edge_beta(dataset, phases, p_nodes)
    tol = rel_tol * max(dataset.curves.scale, 1.0)
    integral = []
    if not any(ph.is_compressible for ph in phases):
        form = integral_form(dataset, phases, float(profiles.p_nodes[0]))
        integral = [form] if form else []
    return CompatibilityReport(profiles.p_nodes, profiles.residual, tol, integral)


def _require_compatible(profiles: EdgeProfiles, rel_tol: float):
    tol = rel_tol * max(profiles.dataset.curves.scale, 1.0)
    if np.any(np.abs(profiles.residual) >= tol):
        raise CompatibilityError(
            f"gas-corner mismatch {np.max(np.abs(profiles.residual)):.3e} Pa exceeds {tol:.3e} Pa")


def dirichlet_pcg(profiles: EdgeProfiles, edge: str, t, p=None, rel_tol: float = 1e-8):
    """Boundary values of P_cg: the edge beta solutions."""
    _require_compatible(profiles, rel_tol)
    return profiles.beta(edge, t, p)


def neumann_pcg(dataset: TwoPhaseDataset, profiles: EdgeProfiles, edge: str, t, p=None, rel_tol: float = 1e-8):
    """Outward normal derivative of P_cg in the equilateral embedding."""
    _require_compatible(profiles, rel_tol)
    t = np.asarray(t, dtype=float)
    k = 0 if p is None else profiles.index(p)
    p_val = profiles.p_nodes[k]
    beta = profiles.beta(edge, t, k=k)
    nu1, nu3 = edge_fractional_flows(dataset, profiles.phases, edge, t, p_val - beta)
    s1, s3 = edge_point(edge, t)
    g1 = nu1 * dataset.curves.dpc12(s1)
    g3 = nu3 * dataset.curves.dpc32(s3)
    return SQRT3 / 3.0 * (g1 + g3)


def dirichlet_mobility(dataset: TwoPhaseDataset, profiles: EdgeProfiles, edge: str, t, p=None, rel_tol: float = 1e-8):
    """Total two-phase mobility on an edge at oil pressure p - P_cg."""
    _require_compatible(profiles, rel_tol)
    t = np.asarray(t, dtype=float)
    k = 0 if p is None else profiles.index(p)
    beta = profiles.beta(edge, t, k=k)
    lam, _, _ = _edge_terms(dataset, profiles.phases, edge, t, profiles.p_nodes[k] - beta)
    if np.any(lam <= 0):
        raise ValueError(f"non-positive boundary mobility on edge {edge}")
    return lam


def export_profiles(dataset: TwoPhaseDataset, profiles: EdgeProfiles, path, n_t: int = 101):
    t = np.linspace(0.0, 1.0, n_t)
    rows = []
    for p in profiles.p_nodes:
        for edge in EDGES:
            b = profiles.beta(edge, t, p)
            g = neumann_pcg(dataset, profiles, edge, t, p)
            d = dirichlet_mobility(dataset, profiles, edge, t, p)
            rows += [(edge, float(ti), float(p), float(bi), float(gi), float(di)) for ti, bi, gi, di in zip(t, b, g, d)]
    write_csv(path, ["edge", "t", "p", "beta", "neumann", "d_data"], rows)
