"""Global capillary pressure P_cg(s, p) and its pressure derivative.

P_cg is obtained by integrating the path ODE

    d beta/dt = f1(C, p - beta) Pc12'(C1) C1' + f3(C, p - beta) Pc32'(C3) C3',
    beta(0) = 0,  C(0) = (1, 0),

along a saturation path ``C`` ending at ``s``. The canonical path runs along
the water-oil edge from (1, 0) to (s1, 0) and then at fixed s1 up to
(s1, s3). Differentiating with respect to p gives the companion ODE
``d gamma/dt = alpha(t) (1 - gamma)`` whose value at the end point is
dP_cg/dp.

All integrations are batched: many (s, p) points share one call to the
adaptive Dormand-Prince integrator, with tolerances tightened by sqrt(batch)
because the step controller uses an RMS error norm.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson, solve_ivp

from .fem import NodalField
from .fluids import PressureWindow
from .flows import FlowModel
from .mesh import lattice_saturations, make_mesh
from .twophase import check_ternary

BATCH = 256


class ODEFailure(RuntimeError):
    pass


class TDViolation(ValueError):
    """Data are not total-differential: P_cg would depend on the path."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class StabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class GcpContext:
    """Flow model plus integration tolerances.

    ``atol`` is relative to the capillary scale max|Pc12| + max Pc32.
    """

    model: FlowModel
    rtol: float = 1e-9
    atol: float = 1e-9
    gamma_atol: float = 1e-12
    td_tol: float = 1e-6
    window: PressureWindow | None = None
    batch: int = BATCH

    def __post_init__(self):
        if self.window is None and self.model.window is not None:
            object.__setattr__(self, "window", self.model.window)

    @property
    def scale(self) -> float:
        return max(self.model.pc_scale, 1.0)

    def tightened(self, factor: float = 1e-3) -> GcpContext:
        return GcpContext(self.model, self.rtol * factor, self.atol * factor,
                          self.gamma_atol * factor, self.td_tol, self.window, self.batch)


# --- batched segment integration ---------------------------------------------


def _rhs_factory(ctx: GcpContext, start, delta, p, with_gamma):
    model = ctx.model
    curves = model.curves
    n = len(p)

    def rhs(t, y):
        s1 = start[:, 0] + t * delta[:, 0]
        s3 = start[:, 1] + t * delta[:, 1]
        s1, s3 = check_ternary(np.clip(s1, 0.0, 1.0), np.clip(s3, 0.0, 1.0))
        beta = y[:n]
        p2 = p - beta
        a, pj = model.phase_terms(s1, s3, p2, p)
        lam = model._lambda(a)
        w1 = curves.dpc12(s1) * delta[:, 0]
        w3 = curves.dpc32(s3) * delta[:, 1]
        dbeta = (a[0] * w1 + a[2] * w3) / lam
        if not with_gamma:
            return dbeta
        da = [ak * ph.log_mobility_slope(pp) for ak, ph, pp in zip(a, model.phases, pj)]
        dlam = da[0] + da[1] + da[2]
        df1 = (da[0] * lam - a[0] * dlam) / lam**2
        df3 = (da[2] * lam - a[2] * dlam) / lam**2
        alpha = df1 * w1 + df3 * w3
        return np.concatenate([dbeta, alpha * (1.0 - y[n:])])

    return rhs


def integrate_segments(ctx: GcpContext, start, end, p, beta0, gamma0=None, t_eval=None):
    """Integrate the beta (and optionally gamma) ODE along straight segments.

    ``start``/``end`` have shape (N, 2) as (s1, s3); ``p`` has shape (N,).
    Returns ``beta(1)`` (and ``gamma(1)``), or the solution object when
    ``t_eval`` is given.
    """
    start = np.atleast_2d(np.asarray(start, dtype=float))
    end = np.atleast_2d(np.asarray(end, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    n = len(p)
    with_gamma = gamma0 is not None
    delta = end - start
    y0 = np.asarray(beta0, dtype=float) * np.ones(n)
    if with_gamma:
        y0 = np.concatenate([y0, np.asarray(gamma0, dtype=float) * np.ones(n)])
    if not np.any(delta):
        return (y0[:n], y0[n:]) if with_gamma else y0
    root = np.sqrt(n)
    atol = np.full(len(y0), ctx.atol * ctx.scale / root)
    if with_gamma:
        atol[n:] = ctx.gamma_atol / root
    rhs = _rhs_factory(ctx, start, delta, p, with_gamma)
    sol = solve_ivp(rhs, (0.0, 1.0), y0, method="RK45", rtol=ctx.rtol / root, atol=atol, t_eval=t_eval)
    if sol.status != 0:
        raise ODEFailure(f"path ODE failed: {sol.message}")
    if t_eval is not None:
        return sol
    y = sol.y[:, -1]
    return (y[:n], y[n:]) if with_gamma else y


def _batched(fn, *arrays, batch):
    n = len(arrays[0])
    outs = None
    for k in range(0, n, batch):
        res = fn(*(a[k:k + batch] for a in arrays))
        if not isinstance(res, tuple):
            res = (res,)
        if outs is None:
            outs = [[] for _ in res]
        for o, r in zip(outs, res):
            o.append(r)
    if outs is None:
        return np.array([])
    joined = [np.concatenate(o) for o in outs]
    return joined[0] if len(joined) == 1 else tuple(joined)


def _prepare(s1, s3, p):
    s1, s3, p = np.broadcast_arrays(np.asarray(s1, float), np.asarray(s3, float), np.asarray(p, float))
    shape = s1.shape
    s1, s3 = check_ternary(s1.ravel(), s3.ravel())
    return s1, s3, p.ravel().astype(float), shape


def _canonical(ctx, s1, s3, p, with_gamma):
    ones = np.ones_like(s1)
    zeros = np.zeros_like(s1)
    leg1_start = np.column_stack([ones, zeros])
    leg1_end = np.column_stack([s1, zeros])
    leg2_end = np.column_stack([s1, s3])
    if with_gamma:
        b1, g1 = integrate_segments(ctx, leg1_start, leg1_end, p, zeros, zeros)
        return integrate_segments(ctx, leg1_end, leg2_end, p, b1, g1)
    b1 = integrate_segments(ctx, leg1_start, leg1_end, p, zeros)
    return integrate_segments(ctx, leg1_end, leg2_end, p, b1)


def pcg(ctx: GcpContext, s1, s3, p):
    """P_cg via the canonical two-leg path; vectorised over (s1, s3, p)."""
    s1, s3, p, shape = _prepare(s1, s3, p)
    out = _batched(lambda a, b, c: _canonical(ctx, a, b, c, False), s1, s3, p, batch=ctx.batch)
    return out.reshape(shape) if shape else float(out[0])


def pcg_and_slope(ctx: GcpContext, s1, s3, p):
    """(P_cg, dP_cg/dp) from the joint beta/gamma integration."""
    s1, s3, p, shape = _prepare(s1, s3, p)
    b, g = _batched(lambda a, c, d: _canonical(ctx, a, c, d, True), s1, s3, p, batch=ctx.batch)
    if not shape:
        return float(b[0]), float(g[0])
    return b.reshape(shape), g.reshape(shape)


def dpcg_dp(ctx: GcpContext, s1, s3, p):
    return pcg_and_slope(ctx, s1, s3, p)[1]


# --- alpha profiles and the quadrature route --------------------------------


def alpha_terms(model: FlowModel, s1, s3, p2, w1, w3, p=None):
    """alpha = dfrac_dp2 weighted by the capillary slopes and leg speeds,
    written in the product form (kr_i d_i kr_j d_j (slope_i - slope_j) / lambda^2)."""
    a, pj = model.phase_terms(s1, s3, p2, p)
    r = [ph.log_mobility_slope(pp) for ph, pp in zip(model.phases, pj)]
    lam2 = (a[0] + a[1] + a[2]) ** 2
    a1 = -a[0] * (a[1] * (r[1] - r[0]) + a[2] * (r[2] - r[0])) / lam2
    a3 = (a[2] * a[0] * (r[2] - r[0]) + a[2] * a[1] * (r[2] - r[1])) / lam2
    return a1 * w1 + a3 * w3


@dataclass
class AlphaProfiles:
    t: np.ndarray
    alpha1: np.ndarray  # (N, len(t))
    alpha3: np.ndarray

    def integrals(self):
        return simpson(self.alpha1, x=self.t, axis=-1), simpson(self.alpha3, x=self.t, axis=-1)


def alpha_profiles(ctx: GcpContext, s1, s3, p, n_samples: int = 401) -> AlphaProfiles:
    """Sample the gamma-ODE coefficients along both canonical legs.

    beta is integrated first (dense sampling via ``t_eval``), then alpha is
    evaluated from the product formulas at the sampled points.
    """
    s1, s3, p, _ = _prepare(s1, s3, p)
    t = np.linspace(0.0, 1.0, n_samples)
    model = ctx.model
    curves = model.curves
    ones, zeros = np.ones_like(s1), np.zeros_like(s1)
    tight = ctx.tightened(1e-2)
    start1 = np.column_stack([ones, zeros])
    end1 = np.column_stack([s1, zeros])
    end2 = np.column_stack([s1, s3])
    out = []
    beta0 = zeros
    for start, end in ((start1, end1), (end1, end2)):
        delta = end - start
        if np.any(delta):
            sol = integrate_segments(tight, start, end, p, beta0, t_eval=t)
            beta = sol.y  # (N, T)
        else:
            beta = np.repeat(beta0[:, None], len(t), axis=1)
        S1 = start[:, 0:1] + t[None, :] * delta[:, 0:1]
        S3 = start[:, 1:2] + t[None, :] * delta[:, 1:2]
        S1, S3 = check_ternary(np.clip(S1, 0, 1), np.clip(S3, 0, 1))
        P = np.repeat(p[:, None], len(t), axis=1)
        w1 = curves.dpc12(S1) * delta[:, 0:1]
        w3 = curves.dpc32(S3) * delta[:, 1:2]
        out.append(alpha_terms(model, S1, S3, P - beta, w1, w3, P))
        beta0 = beta[:, -1]
    return AlphaProfiles(t, out[0], out[1])


def dpcg_dp_quadrature(ctx: GcpContext, s1, s3, p, n_samples: int = 401):
    """dP_cg/dp = 1 - exp(-integral of alpha) with alpha from the product formulas."""
    prof = alpha_profiles(ctx, s1, s3, p, n_samples)
    i1, i3 = prof.integrals()
    return 1.0 - np.exp(-(i1 + i3))


# --- arbitrary paths ------------------------------------------------------------


@dataclass(frozen=True)
class SaturationPath:
    """Piecewise-linear path through waypoints (s1, s3), starting at (1, 0)."""

    waypoints: np.ndarray

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.waypoints, dtype=float))
        if w.shape[1] != 2 or len(w) < 1:
            raise ValueError("waypoints must have shape (K, 2)")
        if not np.allclose(w[0], (1.0, 0.0), atol=1e-14):
            w = np.vstack([[1.0, 0.0], w])
        check_ternary(w[:, 0], w[:, 1])
        object.__setattr__(self, "waypoints", w)

    @property
    def end(self):
        return self.waypoints[-1]

    def refined(self, n_segments: int) -> np.ndarray:
        """Same geometric path split into exactly ``n_segments`` pieces."""
        pts = [tuple(p) for p in self.waypoints]
        if len(pts) == 1:
            pts = pts * 2
        while len(pts) - 1 < n_segments:
            seg = np.array([np.hypot(pts[k + 1][0] - pts[k][0], pts[k + 1][1] - pts[k][1])
                            for k in range(len(pts) - 1)])
            k = int(np.argmax(seg))
            mid = ((pts[k][0] + pts[k + 1][0]) / 2, (pts[k][1] + pts[k + 1][1]) / 2)
            pts.insert(k + 1, mid)
        if len(pts) - 1 > n_segments:
            raise ValueError("path has more segments than requested")
        return np.array(pts)


def integrate_paths(ctx: GcpContext, paths, p):
    """beta(1) for many paths at once; ``p`` is a scalar or one value per path."""
    paths = list(paths)
    if not paths:
        return np.array([])
    p = np.broadcast_to(np.asarray(p, dtype=float), (len(paths),)).copy()
    K = max(max(len(pa.waypoints) - 1 for pa in paths), 1)
    W = np.stack([pa.refined(K) for pa in paths])  # (N, K+1, 2)
    beta = np.zeros(len(paths))
    for k in range(K):
        beta = _batched(lambda s, e, pp, b: integrate_segments(ctx, s, e, pp, b),
                        W[:, k], W[:, k + 1], p, beta, batch=ctx.batch)
    return beta


def integrate_beta(ctx: GcpContext, path: SaturationPath, p: float) -> float:
    return float(integrate_paths(ctx, [path], p)[0])


def random_monotone_path(rng: np.random.Generator, s1, s3, min_segments=3, max_segments=8) -> SaturationPath:
    """Random path from (1, 0) to (s1, s3) along which s1 decreases and s3 increases."""
    k = int(rng.integers(min_segments, max_segments + 1))
    u = np.sort(rng.random(k - 1))
    v = np.sort(rng.random(k - 1))
    if s3 > 0:
        v = np.minimum(v, u * (1.0 - s1) / s3)
    w1 = 1.0 - u * (1.0 - s1)
    w3 = v * s3
    pts = np.vstack([[1.0, 0.0], np.column_stack([w1, w3]), [s1, s3]])
    return SaturationPath(pts)


def extreme_paths(s1, s3):
    """The two extreme monotone paths: along the water-oil edge first, or along
    the water-gas edge first."""
    lower = SaturationPath([[1.0, 0.0], [s1, 0.0], [s1, s3]])
    upper = SaturationPath([[1.0, 0.0], [1.0 - s3, s3], [s1, s3]])
    return lower, upper


def td_residual_paths(ctx: GcpContext, s1, s3, p, n_paths: int = 20, seed: int = 0):
    """Spread max - min of beta(1) over random monotone paths plus both extreme paths.

    Vectorised over end points; returns an array of spreads (Pa).
    """
    s1, s3, p, shape = _prepare(s1, s3, p)
    rng = np.random.default_rng(seed)
    paths, owner = [], []
    for k, (a, b) in enumerate(zip(s1, s3)):
        group = list(extreme_paths(a, b)) + [random_monotone_path(rng, a, b) for _ in range(n_paths)]
        paths += group
        owner += [k] * len(group)
    owner = np.array(owner)
    # group by refined segment count 8 so all paths share kink locations
    beta = integrate_paths(ctx, [SaturationPath(pa.refined(8)) for pa in paths], p[owner])
    spread = np.array([np.ptp(beta[owner == k]) for k in range(len(s1))])
    return spread.reshape(shape) if shape else float(spread[0])


def td_residual_cross(ctx: GcpContext, s1, s3, p, pcg_probe=None, h: float = 1e-4):
    """Mismatch of the mixed-derivative form of the TD condition, by centred differences."""
    s1, s3, p, shape = _prepare(s1, s3, p)
    if np.any(s1 - h < 0) or np.any(s3 - h < 0) or np.any(s1 + s3 + h > 1):
        raise ValueError("finite-difference stencil leaves the ternary diagram")
    probe = pcg_probe or (lambda a, b, c: pcg(ctx, a, b, c))
    model = ctx.model

    def f_at(a, b, j):
        P = probe(a, b, p)
        f1, _, f3 = model.fractional_flows(a, b, p - P, p)
        return f1 if j == 1 else f3

    d3f1 = (f_at(s1, s3 + h, 1) - f_at(s1, s3 - h, 1)) / (2 * h)
    d1f3 = (f_at(s1 + h, s3, 3) - f_at(s1 - h, s3, 3)) / (2 * h)
    r = d3f1 * model.curves.dpc12(s1) - d1f3 * model.curves.dpc32(s3)
    return r.reshape(shape) if shape else float(r[0])


# --- pressure variables -----------------------------------------------------


def oil_from_global(ctx: GcpContext, s1, s3, p, evaluator=None):
    ev = evaluator or (lambda a, b, c: pcg(ctx, a, b, c))
    return np.asarray(p, dtype=float) - ev(s1, s3, p)


@dataclass
class FixedPointResult:
    p: np.ndarray
    iterations: int
    residual: float
    converged: bool
    method: str = "picard"


def global_from_oil(ctx: GcpContext, s1, s3, p2, evaluator=None, tol: float = 1e-8,
                    max_iter: int = 50, require_stable: bool = False) -> FixedPointResult:
    """Solve P = p2 + P_cg(s, P) by fixed-point iteration, with bisection fallback."""
    ev = evaluator or (lambda a, b, c: pcg(ctx, a, b, c))
    s1, s3, p2 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (s1, s3, p2)))
    P = p2 + ev(s1, s3, p2)
    res = np.inf
    for it in range(1, max_iter + 1):
        P_new = p2 + ev(s1, s3, P)
        res = float(np.max(np.abs(P_new - P))) if P.size else 0.0
        P = P_new
        if res < tol:
            return FixedPointResult(P, it, res, True)
    # bisection on the monotone map g(P) = P - P_cg(s, P) - p2
    scale = max(ctx.scale, 1.0)
    lo = p2 - 2 * scale
    hi = p2 + 2 * scale
    g_lo = lo - ev(s1, s3, lo) - p2
    g_hi = hi - ev(s1, s3, hi) - p2
    if np.any(g_lo > 0) or np.any(g_hi < 0):
        return FixedPointResult(P, max_iter, res, False, "bisection")
    for it in range(200):
        mid = 0.5 * (lo + hi)
        g = mid - ev(s1, s3, mid) - p2
        lo = np.where(g < 0, mid, lo)
        hi = np.where(g < 0, hi, mid)
        if np.max(hi - lo) < tol:
            break
    P = 0.5 * (lo + hi)
    res = float(np.max(np.abs(p2 + ev(s1, s3, P) - P)))
    return FixedPointResult(P, max_iter + it + 1, res, res < 10 * tol, "bisection")


def phase_pressure_bounds_check(ctx: GcpContext, s1, s3, p, evaluator=None, tol: float | None = None) -> dict:
    """Check P1 <= P <= P3 with P2 = P - P_cg(s, P)."""
    s1, s3, p = (np.asarray(x, dtype=float) for x in np.broadcast_arrays(s1, s3, p))
    p2 = oil_from_global(ctx, s1, s3, p, evaluator)
    curves = ctx.model.curves
    p1 = p2 + curves.pc12(s1)
    p3 = p2 + curves.pc32(s3)
    tol = ctx.atol * ctx.scale * 10 if tol is None else tol
    low = p - p1
    high = p3 - p
    return {
        "n": int(p.size),
        "ok": bool(np.all(low >= -tol) and np.all(high >= -tol)),
        "min_p_minus_p1": float(np.min(low)),
        "min_p3_minus_p": float(np.min(high)),
        "violations": int(np.sum((low < -tol) | (high < -tol))),
    }


# --- stability -------------------------------------------------------------------


def barycentric_grid(n_side: int):
    """Lattice points with n_side nodes per edge, as flat (s1, s3) arrays."""
    N = n_side - 1
    return lattice_saturations(N)


@dataclass
class StabilityReport:
    s1: np.ndarray = field(repr=False)
    s3: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    dpdp: np.ndarray = field(repr=False)  # (n_p, n_s)
    pcg: np.ndarray = field(repr=False)
    slope_bounded: bool = False
    mobility_slopes_ordered: bool = False
    slope_in_unit_interval: bool = False
    min_one_minus: float = 0.0
    max_one_minus: float = 0.0

    def to_dict(self) -> dict:
        return {
            "n_saturation_nodes": int(len(self.s1)),
            "pressure_nodes": [float(x) for x in self.p],
            "slope_bounded": self.slope_bounded,
            "mobility_slopes_ordered": self.mobility_slopes_ordered,
            "slope_in_unit_interval": self.slope_in_unit_interval,
            "min_dpcg_dp": float(np.min(self.dpdp)),
            "max_dpcg_dp": float(np.max(self.dpdp)),
            "min_one_minus_dpcg_dp": self.min_one_minus,
            "max_one_minus_dpcg_dp": self.max_one_minus,
        }


def stability_report(ctx: GcpContext, n_side: int = 50, p_nodes=None) -> StabilityReport:
    if p_nodes is None:
        p_nodes = ctx.window.nodes() if ctx.window is not None else np.array([0.0])
    p_nodes = np.asarray(p_nodes, dtype=float)
    s1, s3 = barycentric_grid(n_side)
    S1 = np.tile(s1, len(p_nodes))
    S3 = np.tile(s3, len(p_nodes))
    P = np.repeat(p_nodes, len(s1))
    val, slope = pcg_and_slope(ctx, S1, S3, P)
    val = val.reshape(len(p_nodes), -1)
    slope = slope.reshape(len(p_nodes), -1)
    model = ctx.model
    p2 = P - val.ravel()
    pj = model.phase_pressures(S1, S3, p2)
    r = [ph.log_mobility_slope(pp) for ph, pp in zip(model.phases, pj)]
    ordered = bool(np.all(r[2] >= r[1]) and np.all(r[1] >= r[0]))
    one_minus = 1.0 - slope
    return StabilityReport(
        s1=s1, s3=s3, p=p_nodes, dpdp=slope, pcg=val,
        slope_bounded=bool(np.all(np.abs(slope) < 1.0)),
        mobility_slopes_ordered=ordered,
        slope_in_unit_interval=bool(np.all((slope >= -ctx.gamma_atol * 10) & (slope < 1.0))),
        min_one_minus=float(np.min(one_minus)),
        max_one_minus=float(np.max(one_minus)),
    )


# --- tabulated field ---------------------------------------------------------

TD_PROBES = ((0.6, 0.2), (0.3, 0.3), (0.2, 0.6), (0.5, 0.45), (0.1, 0.1))


def td_probe(ctx: GcpContext, n_paths: int = 6, seed: int = 0, p=None) -> dict:
    """Coarse TD screen: max path spread over a fixed probe set."""
    if p is None:
        p = float(np.mean(ctx.window.nodes())) if ctx.window is not None else 0.0
    s1, s3 = np.array(TD_PROBES).T
    spread = td_residual_paths(ctx, s1, s3, np.full(len(s1), p), n_paths=n_paths, seed=seed)
    tol = ctx.td_tol * ctx.scale
    k = int(np.argmax(spread))
    return {
        "max_spread": float(spread[k]),
        "tolerance": tol,
        "worst_s1": float(s1[k]),
        "worst_s3": float(s3[k]),
        "p": p,
        "spreads": [float(x) for x in spread],
        "td": bool(spread[k] < tol),
    }


def _hermite(p_nodes, values, slopes, p):
    """Piecewise cubic Hermite in p; ``values``/``slopes`` have shape (n_p, M)."""
    k = np.clip(np.searchsorted(p_nodes, p, side="right") - 1, 0, len(p_nodes) - 2)
    cols = np.arange(values.shape[1])
    h = p_nodes[k + 1] - p_nodes[k]
    t = (p - p_nodes[k]) / h
    h00 = (1 + 2 * t) * (1 - t) ** 2
    h10 = t * (1 - t) ** 2
    h01 = t * t * (3 - 2 * t)
    h11 = t * t * (t - 1)
    d00 = 6 * t * t - 6 * t
    d10 = 3 * t * t - 4 * t + 1
    d01 = -d00
    d11 = 3 * t * t - 2 * t
    y0, y1 = values[k, cols], values[k + 1, cols]
    m0, m1 = slopes[k, cols], slopes[k + 1, cols]
    val = h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
    der = (d00 * y0 + d01 * y1) / h + d10 * m0 + d11 * m1
    return val, der


@dataclass
class GlobalCapillaryField:
    """P_cg and dP_cg/dp tabulated on lattice nodes x pressure nodes.

    Saturation interpolation is P2 on the lattice when ``n_s - 1`` is even
    (P1 otherwise); pressure interpolation is cubic Hermite using the
    tabulated slope. Node values come straight from the ODE integrator.
    """

    n_s: int
    p_nodes: np.ndarray
    s1: np.ndarray = field(repr=False)
    s3: np.ndarray = field(repr=False)
    pcg_nodes: np.ndarray = field(repr=False)  # (n_p, n_nodes)
    slope_nodes: np.ndarray = field(repr=False)
    td_report: dict = field(default_factory=dict)

    def __post_init__(self):

        N = self.n_s - 1
        self.order = 2 if N % 2 == 0 and N >= 4 else 1
        mesh = make_mesh(N // self.order)
        self._fields = [
            (NodalField(mesh, v, self.order), NodalField(mesh, g, self.order))
            for v, g in zip(self.pcg_nodes, self.slope_nodes)
        ]

    def _slices(self, s1, s3):
        vals = np.array([f(s1, s3) for f, _ in self._fields])
        slopes = np.array([g(s1, s3) for _, g in self._fields])
        return vals, slopes

    def evaluate(self, s1, s3, p):
        """(P_cg, dP_cg/dp) at arbitrary points."""
        s1, s3, p = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (s1, s3, p)))
        shape = s1.shape
        vals, slopes = self._slices(s1.ravel(), s3.ravel())
        if len(self.p_nodes) == 1:
            v, d = vals[0], slopes[0]
        else:
            v, d = _hermite(self.p_nodes, vals, slopes, np.clip(p.ravel(), self.p_nodes[0], self.p_nodes[-1]))
        return v.reshape(shape), d.reshape(shape)

    def __call__(self, s1, s3, p):
        return self.evaluate(s1, s3, p)[0]

    def slope(self, s1, s3, p):
        return self.evaluate(s1, s3, p)[1]

    def gradient_s(self, s1, s3, p):
        """(dP_cg/ds1, dP_cg/ds3), linearly blended between pressure nodes."""
        s1, s3, p = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (s1, s3, p)))
        g = np.array([f.gradient(s1.ravel(), s3.ravel()) for f, _ in self._fields])  # (n_p, 2, M)
        if len(self.p_nodes) == 1:
            return g[0, 0].reshape(s1.shape), g[0, 1].reshape(s1.shape)
        out = []
        for c in range(2):
            out.append(np.array([np.interp(pp, self.p_nodes, g[:, c, m]) for m, pp in enumerate(p.ravel())]).reshape(s1.shape))
        return tuple(out)

    @property
    def stable(self) -> bool:
        return bool(np.all(np.abs(self.slope_nodes) < 1.0))

    def rows(self):
        for k, p in enumerate(self.p_nodes):
            for a, b, v, g in zip(self.s1, self.s3, self.pcg_nodes[k], self.slope_nodes[k]):
                yield {"s1": a, "s3": b, "p": p, "pcg": v, "dpcg_dp": g}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["s1", "s3", "p", "pcg", "dpcg_dp"])
            w.writeheader()
            for r in self.rows():
                w.writerow({k: repr(float(v)) for k, v in r.items()})


def build_field(ctx: GcpContext, n_s: int = 33, window: PressureWindow | None = None,
                check_td: bool = True) -> GlobalCapillaryField:
    """Tabulate P_cg on the level ``n_s - 1`` lattice at every pressure node.

    Refuses with :class:`TDViolation` when a coarse path-spread screen shows
    the data are not total-differential.
    """
    if n_s < 3:
        raise ValueError("n_s must be >= 3")
    window = window or ctx.window
    p_nodes = window.nodes() if window is not None else np.array([0.0])
    report = td_probe(ctx, p=float(np.mean(p_nodes))) if check_td else {}
    if check_td and not report["td"]:
        raise TDViolation(
            f"path spread {report['max_spread']:.3e} Pa exceeds {report['tolerance']:.3e} Pa; "
            "P_cg would depend on the integration path", report)
    s1, s3 = barycentric_grid(n_s)
    S1 = np.tile(s1, len(p_nodes))
    S3 = np.tile(s3, len(p_nodes))
    P = np.repeat(p_nodes, len(s1))
    v, g = pcg_and_slope(ctx, S1, S3, P)
    return GlobalCapillaryField(n_s, np.asarray(p_nodes, dtype=float), s1, s3,
                                v.reshape(len(p_nodes), -1), g.reshape(len(p_nodes), -1), report)
