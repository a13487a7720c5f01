"""1D three-phase compressible IMPES simulator in two pressure formulations.

``oil``:    unknown P2, phase fluxes F_j = -T a_j (dP2 + dPc_j - rho_j g dZ).
``global``: unknown P, total flux q = -T lam ((1 - dP_cg/dp) dP - rho g dZ),
            split as F_j = f_j q + T a_j (sum_k f_k G_k - G_j),
            G_j = dPc_j - rho_j g dZ.

Both share one time step: kr and capillary pressures are frozen at the old
saturations, mobilities are upwinded by the sign of the old phase potential,
and the new pressure is the root of the volume closure S1 + S2 + S3 = 1,
where S_j is recovered from the flux-updated phase masses
m_j = phi(p_pore) B_j(P_j) S_j. Newton's method with a tridiagonal
finite-difference Jacobian (three-colour probing) solves the closure.
"""

from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .flows import FlowModel
from .gcp import GlobalCapillaryField, _hermite
from .mesh import lattice_saturations
from .twophase import write_csv

SAT_TOL = 1e-12


class Formulation(str, enum.Enum):
    OIL = "oil"
    GLOBAL = "global"


class CFLViolation(RuntimeError):
    pass


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class RockModel:
    K: float | np.ndarray = 1e-6
    phi0: float | np.ndarray = 0.2
    c_r: float = 0.0
    p_ref: float = 1e7
    dzdx: float = 0.0
    g: float = 0.0

    def porosity(self, p):
        phi = np.asarray(self.phi0) * (1.0 + self.c_r * (np.asarray(p) - self.p_ref))
        if np.any(phi <= 0):
            raise SimulationError("porosity became non-positive")
        return phi

    def validate(self, n: int):
        K = np.broadcast_to(np.asarray(self.K, dtype=float), (n,))
        phi0 = np.broadcast_to(np.asarray(self.phi0, dtype=float), (n,))
        if np.any(K <= 0):
            raise ValueError("permeability must be positive")
        if np.any(phi0 <= 0) or np.any(phi0 >= 1):
            raise ValueError("reference porosity must lie in (0, 1)")
        return K, phi0


@dataclass(frozen=True)
class Grid:
    n: int
    length: float = 1.0

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.dx


@dataclass(frozen=True)
class BoundaryConditions:
    """Fixed oil pressure and saturation in ghost states at both ends.

    The outlet ghost carries ``s_out`` (normally the initial saturation).
    ``closed_left``/``closed_right`` switch a face to no-flow.
    """

    p2_in: float
    p2_out: float
    s_in: tuple = (1.0, 0.0)
    s_out: tuple = (0.0, 0.0)
    closed_left: bool = False
    closed_right: bool = False


@dataclass
class SimState:
    s1: np.ndarray
    s3: np.ndarray
    p: np.ndarray  # P2 (oil) or P (global)
    t: float = 0.0

    @property
    def s2(self) -> np.ndarray:
        return 1.0 - self.s1 - self.s3

    def copy(self) -> SimState:
        return SimState(self.s1.copy(), self.s3.copy(), self.p.copy(), self.t)


class PcgProvider:
    """P_cg and its pressure slope from a tabulated field; zero when absent."""

    def __init__(self, field_: GlobalCapillaryField | None):
        self.field = field_

    def __call__(self, s1, s3, p):
        if self.field is None:
            z = np.zeros(np.broadcast(s1, s3, p).shape)
            return z, z.copy()
        s1, s3 = self._project(s1, s3)
        return self.field.evaluate(s1, s3, p)

    def frozen_slices(self, s1, s3):
        """Per-pressure-node values at fixed saturations, for cheap re-evaluation in p."""
        if self.field is None:
            return None
        s1, s3 = self._project(s1, s3)
        return self.field._slices(s1, s3)

    def at_slices(self, slices, p):
        if slices is None:
            z = np.zeros(np.shape(p))
            return z, z.copy()
        vals, slopes = slices
        pn = self.field.p_nodes
        if len(pn) == 1:
            return vals[0], slopes[0]
        return _hermite(pn, vals, slopes, np.clip(p, pn[0], pn[-1]))

    @staticmethod
    def _project(s1, s3):
        s1 = np.clip(s1, 0.0, 1.0)
        s3 = np.clip(s3, 0.0, 1.0)
        tot = np.maximum(s1 + s3, 1.0)
        return s1 / tot, s3 / tot

    def global_from_oil(self, s1, s3, p2, tol=1e-9, max_iter=100):
        P = p2 + self(s1, s3, p2)[0]
        for _ in range(max_iter):
            P_new = p2 + self(s1, s3, P)[0]
            if np.max(np.abs(P_new - P)) < tol:
                return P_new
            P = P_new
        raise SimulationError("global pressure fixed point did not converge")


@dataclass
class StepInfo:
    newton_iterations: int
    residual: float
    fluxes: np.ndarray  # (3, n + 1) phase mass fluxes per unit area at faces
    mass_error: float


class Simulator:
    def __init__(self, model: FlowModel, rock: RockModel, grid: Grid, bc: BoundaryConditions,
                 formulation: Formulation | str, field_: GlobalCapillaryField | None = None,
                 newton_tol: float = 1e-12, max_newton: int = 25):
        self.model = model
        self.rock = rock
        self.grid = grid
        self.bc = bc
        self.formulation = Formulation(formulation)
        self.pcg = PcgProvider(field_)
        if self.formulation is Formulation.GLOBAL and field_ is None and model.pc_scale > 0:
            raise SimulationError("global formulation needs a tabulated P_cg field")
        if self.formulation is Formulation.GLOBAL and field_ is not None and not field_.stable:
            raise SimulationError("stability condition fails on the tabulated field; global formulation refused")
        self.newton_tol = newton_tol
        self.max_newton = max_newton
        n = grid.n
        self.K, self.phi0 = rock.validate(n)
        self.compressible = rock.c_r != 0.0 or any(ph.is_compressible for ph in model.phases)
        # extended arrays: ghost, cells, ghost
        Kx = np.concatenate([self.K[:1], self.K, self.K[-1:]])
        dist = np.full(n + 1, grid.dx)
        dist[0] = dist[-1] = grid.dx / 2
        Kf = 2 * Kx[:-1] * Kx[1:] / (Kx[:-1] + Kx[1:])
        self.T = Kf / dist
        if bc.closed_left:
            self.T[0] = 0.0
        if bc.closed_right:
            self.T[-1] = 0.0
        xe = np.concatenate([[0.0], grid.x, [grid.length]])
        self.Z = rock.dzdx * xe
        self.ghost_s1 = np.array([bc.s_in[0], bc.s_out[0]], dtype=float)
        self.ghost_s3 = np.array([bc.s_in[1], bc.s_out[1]], dtype=float)
        p2g = np.array([bc.p2_in, bc.p2_out], dtype=float)
        if self.formulation is Formulation.GLOBAL:
            self.ghost_p = self.pcg.global_from_oil(self.ghost_s1, self.ghost_s3, p2g)
        else:
            self.ghost_p = p2g

    # --- state helpers -----------------------------------------------------

    def initial_state(self, s_init, p2=None) -> SimState:
        n = self.grid.n
        s1 = np.full(n, float(s_init[0]))
        s3 = np.full(n, float(s_init[1]))
        if p2 is None:
            p2 = self.bc.p2_in + (self.bc.p2_out - self.bc.p2_in) * self.grid.x / self.grid.length
        p2 = np.broadcast_to(np.asarray(p2, dtype=float), (n,)).copy()
        p = self.pcg.global_from_oil(s1, s3, p2) if self.formulation is Formulation.GLOBAL else p2
        return SimState(s1, s3, p, 0.0)

    def oil_pressure(self, s1, s3, p):
        if self.formulation is Formulation.OIL:
            return p
        return p - self.pcg(s1, s3, p)[0]

    def global_pressure(self, s1, s3, p):
        if self.formulation is Formulation.GLOBAL:
            return p
        return self.pcg.global_from_oil(s1, s3, p)

    def phase_pressures(self, s1, s3, p, pcg_val=None):
        curves = self.model.curves
        if self.formulation is Formulation.OIL:
            p2 = p
        else:
            if pcg_val is None:
                pcg_val = self.pcg(s1, s3, p)[0]
            p2 = p - pcg_val
        return p2 + curves.pc12(np.clip(s1, 0, 1)), p2, p2 + curves.pc32(np.clip(s3, 0, 1))

    def pore_pressure(self, s1, s3, p):
        if self.rock.c_r == 0.0:
            return p
        if self.formulation is Formulation.GLOBAL:
            return p
        return self.pcg.global_from_oil(s1, s3, p)

    def masses(self, s1, s3, p):
        """Phase masses per unit bulk volume, in reference-density units."""
        s = (s1, 1.0 - s1 - s3, s3)
        pj = self.phase_pressures(s1, s3, p)
        phi = self.rock.porosity(self.pore_pressure(s1, s3, p)) * np.ones_like(s1)
        return np.array([phi * ph.volume_factor(pp) * sj for ph, pp, sj in zip(self.model.phases, pj, s)])

    def saturations_from_masses(self, m, p, guess):
        """Invert m_j = phi B_j(P_j(S)) S_j for S at fixed pressure."""
        phases = self.model.phases
        if not self.compressible:
            phi = self.rock.porosity(p) * np.ones(self.grid.n)
            return m / (phi * np.array([ph.volume_factor(p) for ph in phases]))
        s = np.array(guess, dtype=float)
        for _ in range(50):
            pj = self.phase_pressures(s[0], s[2], p)
            phi = self.rock.porosity(self.pore_pressure(s[0], s[2], p)) * np.ones(self.grid.n)
            s_new = np.array([mj / (phi * ph.volume_factor(pp)) for mj, ph, pp in zip(m, phases, pj)])
            if np.max(np.abs(s_new - s)) < 1e-15:
                return s_new
            s = s_new
        return s

    # --- fluxes -------------------------------------------------------------

    def _extended(self, a, ghost):
        return np.concatenate([ghost[:1], a, ghost[1:]])

    def freeze(self, state: SimState) -> dict:
        """Quantities held at the old time level for one step."""
        s1 = self._extended(state.s1, self.ghost_s1)
        s3 = self._extended(state.s3, self.ghost_s3)
        p = self._extended(state.p, self.ghost_p)
        curves = self.model.curves
        kr = np.array(self.model.kr(s1, s3, None))
        pc = np.array([curves.pc12(s1), np.zeros_like(s1), curves.pc32(s3)])
        pj = np.array(self.phase_pressures(s1, s3, p))
        rho = np.array([ph.density(pp) for ph, pp in zip(self.model.phases, pj)])
        rho_f = 0.5 * (rho[:, :-1] + rho[:, 1:])
        dphi = (pj[:, 1:] - pj[:, :-1]) - rho_f * self.rock.g * (self.Z[1:] - self.Z[:-1])
        up = np.where(dphi <= 0, np.arange(len(s1) - 1)[None, :], np.arange(1, len(s1))[None, :])
        frozen = {"s1": s1, "s3": s3, "kr": kr, "pc": pc, "up": up}
        if self.formulation is Formulation.GLOBAL:
            frozen["pcg"] = self.pcg.frozen_slices(s1, s3)
        return frozen

    def face_fluxes(self, p_cells, frozen) -> np.ndarray:
        """Phase mass fluxes (3, n + 1) at the pressure iterate ``p_cells``."""
        p = self._extended(p_cells, self.ghost_p)
        s1, s3 = frozen["s1"], frozen["s3"]
        g = self.rock.g
        dZ = self.Z[1:] - self.Z[:-1]
        T = self.T
        if self.formulation is Formulation.GLOBAL:
            pcg_val, slope = self.pcg.at_slices(frozen["pcg"], p)
            p2 = p - pcg_val
        else:
            p2 = p
        pc = frozen["pc"]
        pj = p2[None, :] + pc
        phases = self.model.phases
        d = np.array([ph.mobility(pp) for ph, pp in zip(phases, pj)])
        rho = np.array([ph.density(pp) for ph, pp in zip(phases, pj)])
        rho_f = 0.5 * (rho[:, :-1] + rho[:, 1:])
        up = frozen["up"]
        cols = np.arange(3)[:, None]
        a = frozen["kr"][cols, up] * d[cols, up]
        G = (pc[:, 1:] - pc[:, :-1]) - rho_f * g * dZ
        if self.formulation is Formulation.OIL:
            return -T * a * ((p2[1:] - p2[:-1])[None, :] + G)
        lam = a.sum(axis=0)
        f = a / lam
        rho_tot = np.sum(f * rho_f, axis=0)
        slope_f = 0.5 * (slope[:-1] + slope[1:])
        q = -T * lam * ((1.0 - slope_f) * (p[1:] - p[:-1]) - rho_tot * g * dZ)
        mix = np.sum(f * G, axis=0)
        return f * q + T * a * (mix[None, :] - G)

    def _residual(self, p_cells, m_old, frozen, dt, guess):
        F = self.face_fluxes(p_cells, frozen)
        m_new = m_old - dt / self.grid.dx * (F[:, 1:] - F[:, :-1])
        s = self.saturations_from_masses(m_new, p_cells, guess)
        return s.sum(axis=0) - 1.0, s, m_new, F

    def _jacobian(self, p_iter, R, m_old, frozen, dt, guess):
        n = self.grid.n
        scale = abs(self.bc.p2_in - self.bc.p2_out) + self.model.curves.scale
        delta = 1e-5 * max(scale, 1.0)
        ab = np.zeros((3, n))
        for c in range(3):
            dp = np.zeros(n)
            dp[c::3] = delta
            Rc, *_ = self._residual(p_iter + dp, m_old, frozen, dt, guess)
            col = (Rc - R) / delta
            idx = np.arange(c, n, 3)
            ab[1, idx] = col[idx]
            up = idx[idx > 0]
            ab[0, up] = col[up - 1]  # J[i-1, i]
            lo = idx[idx < n - 1]
            ab[2, lo] = col[lo + 1]  # J[i+1, i]
        return ab

    def _setup(self, state: SimState):
        frozen = self.freeze(state)
        m_old = self.masses(state.s1, state.s3, state.p)
        guess = np.array([state.s1, state.s2, state.s3])
        return frozen, m_old, guess

    def assemble_pressure_system(self, state: SimState, dt: float, p_iter=None):
        """Tridiagonal Newton system (banded storage) and closure residual at ``p_iter``."""
        frozen, m_old, guess = self._setup(state)
        p_iter = state.p if p_iter is None else p_iter
        R, *_ = self._residual(p_iter, m_old, frozen, dt, guess)
        return self._jacobian(p_iter, R, m_old, frozen, dt, guess), R

    def step(self, state: SimState, dt: float):
        """One IMPES step; returns (new state, StepInfo). Raises CFLViolation."""
        frozen, m_old, guess = self._setup(state)
        p = state.p.copy()
        it = 0
        R, s, m_new, F = self._residual(p, m_old, frozen, dt, guess)
        while True:
            if np.max(np.abs(R)) < self.newton_tol:
                break
            if it >= self.max_newton:
                raise SimulationError(f"Newton did not converge (|R| = {np.max(np.abs(R)):.3e})")
            ab = self._jacobian(p, R, m_old, frozen, dt, guess)
            p = p - solve_banded((1, 1), ab, R)
            it += 1
            R, s, m_new, F = self._residual(p, m_old, frozen, dt, guess)
        if np.any(s < -SAT_TOL) or np.any(s > 1 + SAT_TOL):
            raise CFLViolation(f"saturation overshoot (min {s.min():.3e}, max {s.max():.3e})")
        s = np.clip(s, 0.0, 1.0)
        dx = self.grid.dx
        inflow = F[:, 0] - F[:, -1]
        change = (m_new - m_old).sum(axis=1) * dx
        scale = np.maximum(np.maximum(np.abs(m_old).sum(axis=1) * dx, dt * np.abs(F).max(axis=1)), 1e-300)
        mass_err = float(np.max(np.abs(change - dt * inflow) / scale))
        new = SimState(s[0], s[2], p, state.t + dt)
        return new, StepInfo(it, float(np.max(np.abs(R))), F, mass_err)

    # --- diagnostics --------------------------------------------------------

    def stable_dt(self, state: SimState, cfl: float = 0.5, n_lattice: int = 40) -> float:
        """Explicit-transport step bound from advective and capillary speeds.

        Spectral radii of the fractional-flow Jacobian and of the capillary
        diffusion matrix are maximised over a lattice of the diagram.
        """
        frozen = self.freeze(state)
        F = self.face_fluxes(state.p, frozen)
        q = np.max(np.abs(F.sum(axis=0)))
        model = self.model
        curves = model.curves
        h = 1e-6
        s1, s3 = lattice_saturations(n_lattice)
        s1 = h + s1 * (1 - 3 * h)
        s3 = h + s3 * (1 - 3 * h)
        p2 = float(np.mean(self.oil_pressure(state.s1, state.s3, state.p)))
        pv = np.full_like(s1, p2)

        def frac(a, b):
            f1, _, f3 = model.fractional_flows(a, b, pv, None)
            return np.array([f1, f3])

        J = np.stack([(frac(s1 + h, s3) - frac(s1 - h, s3)) / (2 * h),
                      (frac(s1, s3 + h) - frac(s1, s3 - h)) / (2 * h)], axis=-1)  # (2, M, 2)
        J = np.moveaxis(J, 0, 1)
        a, _ = model.phase_terms(s1, s3, pv, None)
        lam = a[0] + a[1] + a[2]
        f1, f3 = a[0] / lam, a[2] / lam
        c1, c3 = curves.dpc12(s1), curves.dpc32(s3)
        D = np.empty((len(s1), 2, 2))
        D[:, 0, 0] = a[0] * (1 - f1) * c1
        D[:, 0, 1] = -a[0] * f3 * c3
        D[:, 1, 0] = -a[2] * f1 * c1
        D[:, 1, 1] = a[2] * (1 - f3) * c3
        rho_f = float(np.max(np.abs(np.linalg.eigvals(J))))
        rho_d = float(np.max(np.abs(np.linalg.eigvals(D))))
        phi = float(np.min(self.rock.porosity(state.p) * self.phi0 / np.asarray(self.rock.phi0)))
        dx = self.grid.dx
        rate = q * rho_f / (phi * dx) + 2.0 * np.max(self.K) * rho_d / (phi * dx * dx)
        return cfl / max(rate, 1e-300)


# --- drivers -----------------------------------------------------------------


@dataclass
class RunResult:
    formulation: Formulation
    states: list  # snapshots
    steps: int
    dt: float
    max_mass_error: float
    inflow_volume: float  # cumulative total inflow per unit area (reference volumes)
    final: SimState = None
    elapsed: float = 0.0

    def rows(self, sim: Simulator):
        x = sim.grid.x
        for st in self.states:
            F = sim.face_fluxes(st.p, sim.freeze(st))
            q = 0.5 * (F.sum(axis=0)[:-1] + F.sum(axis=0)[1:])
            for xi, a, b, pp, qq in zip(x, st.s1, st.s3, st.p, q):
                yield (st.t, xi, a, b, pp, qq)


def _schedule(t_end, dt, n_output):
    out_times = np.linspace(0.0, t_end, n_output + 1)[1:] if n_output > 0 else np.array([t_end])
    return out_times


def run_lockstep(sims, states, t_end, dt, n_output: int = 4, min_dt: float | None = None):
    """Advance several simulators with identical time steps.

    A CFL violation in any of them halves the common step and retries all.
    """
    min_dt = min_dt or dt * 2.0**-12
    outputs = [[st.copy()] for st in states]
    mass_err = [0.0] * len(sims)
    inflow = [0.0] * len(sims)
    out_times = list(_schedule(t_end, dt, n_output))
    t = states[0].t
    steps = 0
    cur_dt = dt
    while t < t_end - 1e-12 * t_end:
        h = min(cur_dt, t_end - t, out_times[0] - t if out_times else cur_dt)
        try:
            res = [sim.step(st, h) for sim, st in zip(sims, states)]
        except CFLViolation:
            cur_dt /= 2
            if cur_dt < min_dt:
                raise SimulationError("time step collapsed under repeated CFL violations")
            continue
        states = [r[0] for r in res]
        for k, (_, info) in enumerate(res):
            mass_err[k] = max(mass_err[k], info.mass_error)
            inflow[k] += h * float(info.fluxes[:, 0].sum())
        t = states[0].t
        steps += 1
        if out_times and t >= out_times[0] - 1e-12 * t_end:
            for k, st in enumerate(states):
                outputs[k].append(st.copy())
            out_times.pop(0)
    results = [RunResult(sim.formulation, outputs[k], steps, dt, mass_err[k], inflow[k], states[k])
               for k, sim in enumerate(sims)]
    return results


@dataclass
class CaseConfig:
    n_cells: int = 200
    length: float = 1.0
    rock: RockModel = field(default_factory=RockModel)
    p2_in: float = 1.025e7
    p2_out: float = 9.75e6
    s_in: tuple = (0.6, 0.3)
    s_init: tuple = (0.1, 0.0)
    t_end: float = 0.15
    cfl: float = 0.5
    dt: float | None = None
    n_output: int = 4
    field_ns: int = 33

    def with_cells(self, n: int) -> CaseConfig:
        return replace(self, n_cells=n)


def make_simulators(model: FlowModel, cfg: CaseConfig, field_: GlobalCapillaryField | None):
    grid = Grid(cfg.n_cells, cfg.length)
    bc = BoundaryConditions(cfg.p2_in, cfg.p2_out, tuple(cfg.s_in), tuple(cfg.s_init))
    sims = [Simulator(model, cfg.rock, grid, bc, f, field_) for f in (Formulation.OIL, Formulation.GLOBAL)]
    states = [sim.initial_state(cfg.s_init) for sim in sims]
    return sims, states


def common_dt(sims, states, cfg: CaseConfig) -> float:
    if cfg.dt is not None:
        return float(cfg.dt)
    dt = min(sim.stable_dt(st, cfg.cfl) for sim, st in zip(sims, states))
    n = int(np.ceil(cfg.t_end / dt))
    return cfg.t_end / n


def run(model: FlowModel, cfg: CaseConfig, formulation, field_=None):
    grid = Grid(cfg.n_cells, cfg.length)
    bc = BoundaryConditions(cfg.p2_in, cfg.p2_out, tuple(cfg.s_in), tuple(cfg.s_init))
    sim = Simulator(model, cfg.rock, grid, bc, formulation, field_)
    st = sim.initial_state(cfg.s_init)
    dt = common_dt([sim], [st], cfg)
    t0 = time.perf_counter()
    (res,) = run_lockstep([sim], [st], cfg.t_end, dt, cfg.n_output)
    res.elapsed = time.perf_counter() - t0
    return sim, res


@dataclass
class CompareReport:
    n_cells: int
    linf_s1: float
    linf_s3: float
    l1_s1: float
    l1_s3: float
    pressure_mismatch: float  # |P_global - P(S_oil, P2_oil)| max, Pa
    steps: int
    dt: float
    elapsed: float
    mass_error: tuple
    tolerance: float = 5e-3

    @property
    def linf(self) -> float:
        return max(self.linf_s1, self.linf_s3)

    @property
    def passed(self) -> bool:
        return self.linf < self.tolerance

    def to_dict(self) -> dict:
        return {
            "n_cells": self.n_cells,
            "linf_saturation_difference": self.linf,
            "linf_s1": self.linf_s1,
            "linf_s3": self.linf_s3,
            "l1_s1": self.l1_s1,
            "l1_s3": self.l1_s3,
            "pressure_mismatch_pa": self.pressure_mismatch,
            "steps": self.steps,
            "dt": self.dt,
            "elapsed_s": self.elapsed,
            "max_mass_error": list(self.mass_error),
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def run_compare(model: FlowModel, cfg: CaseConfig, field_: GlobalCapillaryField | None):
    """Run both formulations in lockstep and compare final saturations."""
    t0 = time.perf_counter()
    sims, states = make_simulators(model, cfg, field_)
    dt = common_dt(sims, states, cfg)
    res_a, res_b = run_lockstep(sims, states, cfg.t_end, dt, cfg.n_output)
    a, b = res_a.final, res_b.final
    dx = sims[0].grid.dx
    P_from_a = sims[0].global_pressure(a.s1, a.s3, a.p)
    rep = CompareReport(
        n_cells=cfg.n_cells,
        linf_s1=float(np.max(np.abs(a.s1 - b.s1))),
        linf_s3=float(np.max(np.abs(a.s3 - b.s3))),
        l1_s1=float(np.sum(np.abs(a.s1 - b.s1)) * dx),
        l1_s3=float(np.sum(np.abs(a.s3 - b.s3)) * dx),
        pressure_mismatch=float(np.max(np.abs(P_from_a - b.p))),
        steps=res_a.steps,
        dt=dt,
        elapsed=time.perf_counter() - t0,
        mass_error=(res_a.max_mass_error, res_b.max_mass_error),
    )
    return rep, (sims, (res_a, res_b))


def refinement_study(model, cfg: CaseConfig, field_, cells=(50, 100, 200)):
    reps = [run_compare(model, cfg.with_cells(n), field_)[0] for n in cells]
    l1 = np.array([r.l1_s1 + r.l1_s3 for r in reps])
    orders = np.log(l1[:-1] / l1[1:]) / np.log(np.asarray(cells[1:], float) / np.asarray(cells[:-1], float))
    return reps, orders


# --- Buckley-Leverett oracle ----------------------------------------------------


def welge_front(frac, s_init: float = 0.0):
    """Shock saturation from the Welge tangent: f(s)/(s - s_i) maximal."""
    s = np.linspace(s_init + 1e-6, 1.0, 20001)
    slope = (frac(s) - frac(s_init)) / (s - s_init)
    k = int(np.argmax(slope))
    lo, hi = s[max(k - 1, 0)], s[min(k + 1, len(s) - 1)]

    def dslope(x, h=1e-7):
        return ((frac(x + h) - frac(s_init)) / (x + h - s_init) - (frac(x - h) - frac(s_init)) / (x - h - s_init)) / (2 * h)

    if 0 < k < len(s) - 1 and dslope(lo) * dslope(hi) < 0:
        sf = brentq(dslope, lo, hi, xtol=1e-13)
    else:
        sf = s[k]
    return sf, (frac(sf) - frac(s_init)) / (sf - s_init)


def buckley_leverett_front_position(frac, phi, injected_volume, s_init=0.0):
    sf, speed = welge_front(frac, s_init)
    return sf, injected_volume * speed / phi


def front_position(x, s, level):
    """First position where ``s`` drops below ``level`` (linear interpolation)."""
    below = np.flatnonzero(s < level)
    if len(below) == 0:
        return float(x[-1])
    k = int(below[0])
    if k == 0:
        return float(x[0])
    return float(x[k - 1] + (x[k] - x[k - 1]) * (s[k - 1] - level) / (s[k - 1] - s[k]))


# --- config and output ----------------------------------------------------------


def write_timeseries(path, sim: Simulator, result: RunResult):
    write_csv(path, ["t", "x", "S1", "S3", "P2_or_P", "q"], result.rows(sim))


def case_from_dict(d: dict) -> CaseConfig:
    rock = RockModel(**d.get("rock", {}))
    keys = {k: d[k] for k in ("n_cells", "length", "p2_in", "p2_out", "t_end", "cfl", "dt", "n_output", "field_ns") if k in d}
    if "s_in" in d:
        keys["s_in"] = tuple(d["s_in"])
    if "s_init" in d:
        keys["s_init"] = tuple(d["s_init"])
    return CaseConfig(rock=rock, **keys)


def save_report(path, report: dict):
    Path(path).write_text(json.dumps(report, indent=2))
