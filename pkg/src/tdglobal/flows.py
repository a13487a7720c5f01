"""Global mobility, fractional flows and global density as functions of (s, p2).

``p2`` is the oil pressure level; the water and gas phase pressures are
``p2 + Pc12(s1)`` and ``p2 + Pc32(s3)``. All functions are vectorised over
``s1, s3, p2``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fluids import PhaseModel, PressureWindow
from .twophase import CapillaryCurves, check_ternary

LAMBDA_RTOL = 1e-14


class DegenerateMobilityError(ArithmeticError):
    """All relative permeabilities vanish, so the total mobility is zero."""


class Provenance(str, enum.Enum):
    EDGE_TRACE = "edge-trace"
    MANUFACTURED = "manufactured"
    RECONSTRUCTED = "reconstructed"


@dataclass(frozen=True)
class ThreePhaseKr:
    """Three-phase relative permeabilities ``(s1, s3[, p]) -> (kr1, kr2, kr3)``.

    ``p`` is the global pressure level; evaluators that do not depend on it
    ignore the argument.
    """

    fn: Callable
    provenance: Provenance = Provenance.MANUFACTURED
    name: str = "kr"
    pressure_dependent: bool = False

    def __call__(self, s1, s3, p=None):
        s1 = np.asarray(s1, dtype=float)
        s3 = np.asarray(s3, dtype=float)
        if self.pressure_dependent:
            k1, k2, k3 = self.fn(s1, s3, p)
        else:
            k1, k2, k3 = self.fn(s1, s3)
        shape = np.broadcast(s1, s3).shape
        return (np.broadcast_to(k1, shape), np.broadcast_to(k2, shape), np.broadcast_to(k3, shape))

    @classmethod
    def corey(cls, n1=1.0, n2=1.0, n3=1.0, name=None) -> ThreePhaseKr:
        """``kr_j = s_j**n_j``; exponent 1 gives the linear model."""

        def fn(s1, s3):
            s2 = np.clip(1.0 - s1 - s3, 0.0, 1.0)
            return s1**n1, s2**n2, s3**n3

        return cls(fn, Provenance.MANUFACTURED, name or f"corey({n1:g},{n2:g},{n3:g})")

    @classmethod
    def linear(cls) -> ThreePhaseKr:
        return cls.corey(1.0, 1.0, 1.0, name="linear")


@dataclass(frozen=True)
class FlowModel:
    """Bundle of kr model, phase models and capillary curves."""

    kr: ThreePhaseKr
    phases: tuple
    curves: CapillaryCurves
    window: PressureWindow | None = None

    def __post_init__(self):
        phases = tuple(self.phases)
        if len(phases) != 3 or [int(p.phase) for p in phases] != [1, 2, 3]:
            raise ValueError("phases must be (water, oil, gas)")
        if self.window is not None:
            lo, hi = self.window.widened(self.curves.scale)
            phases = tuple(p.with_range(lo, hi) for p in phases)
        object.__setattr__(self, "phases", phases)

    @property
    def pc_scale(self) -> float:
        return self.curves.scale

    def phase_pressures(self, s1, s3, p2):
        p2 = np.asarray(p2, dtype=float)
        return p2 + self.curves.pc12(s1), p2, p2 + self.curves.pc32(s3)

    def phase_terms(self, s1, s3, p2, p=None):
        """Return ``a_j = kr_j d_j(P_j)`` and the phase pressures."""
        s1, s3 = check_ternary(s1, s3)
        kr = self.kr(s1, s3, p)
        pj = self.phase_pressures(s1, s3, p2)
        a = [k * ph.mobility(pp) for k, ph, pp in zip(kr, self.phases, pj)]
        return a, pj

    def _lambda(self, a):
        lam = a[0] + a[1] + a[2]
        dmax = max(1.0 / ph.mu for ph in self.phases)
        if np.any(lam <= LAMBDA_RTOL * dmax):
            raise DegenerateMobilityError("total mobility vanishes (all kr are zero)")
        return lam

    def total_mobility(self, s1, s3, p2, p=None):
        a, _ = self.phase_terms(s1, s3, p2, p)
        return self._lambda(a)

    def fractional_flows(self, s1, s3, p2, p=None):
        a, _ = self.phase_terms(s1, s3, p2, p)
        lam = self._lambda(a)
        f1 = a[0] / lam
        f3 = a[2] / lam
        return f1, 1.0 - f1 - f3, f3

    def density(self, s1, s3, p2, p=None):
        a, pj = self.phase_terms(s1, s3, p2, p)
        lam = self._lambda(a)
        f1 = a[0] / lam
        f3 = a[2] / lam
        f2 = 1.0 - f1 - f3
        r1, r2, r3 = (ph.density(pp) for ph, pp in zip(self.phases, pj))
        return f1 * r1 + f2 * r2 + f3 * r3

    def dfrac_dp2(self, s1, s3, p2, j: int, p=None):
        """Analytic partial derivative of f_j (j = 1 or 3) with respect to p2."""
        if j not in (1, 3):
            raise ValueError("j must be 1 or 3")
        a, pj = self.phase_terms(s1, s3, p2, p)
        lam = self._lambda(a)
        da = [ak * ph.log_mobility_slope(pp) for ak, ph, pp in zip(a, self.phases, pj)]
        dlam = da[0] + da[1] + da[2]
        k = j - 1
        return (da[k] * lam - a[k] * dlam) / lam**2


def lambda_total(model: FlowModel, s1, s3, p2, p=None):
    return model.total_mobility(s1, s3, p2, p)


def fractional_flows(model: FlowModel, s1, s3, p2, p=None):
    return model.fractional_flows(s1, s3, p2, p)


def global_density(model: FlowModel, s1, s3, p2, p=None):
    return model.density(s1, s3, p2, p)


def dfrac_dp2(model: FlowModel, s1, s3, p2, j, p=None):
    return model.dfrac_dp2(s1, s3, p2, j, p)
