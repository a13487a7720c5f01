"""Manufactured datasets with known behaviour.

========  =======================  ===========================  =====================
name      kr                       capillary curves             phases
========  =======================  ===========================  =====================
ZERO      linear                   Pc12 = Pc32 = 0              incompressible, unit
LIN       linear                   -A(1-s1), B s3               incompressible, unit
COREY     s_j**2                   -A(1-s1), B s3               incompressible, unit
GAS       linear                   0, B s3                      gas exponential
WOG       linear                   -A(1-s1), B s3               gas exponential
WATERC    linear                   -A(1-s1), B s3               water exponential
========  =======================  ===========================  =====================

LIN and GAS satisfy the total-differential condition (GAS because water and
oil share one mobility and Pc12 vanishes, so f3 depends on s3 and p2 only).
COREY, WOG and WATERC do not; they are used for detection and stability tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fluids import Phase, PhaseModel, PressureWindow, VolumeFactorKind
from .flows import FlowModel, ThreePhaseKr
from .twophase import CapillaryCurves, Table, TwoPhaseDataset

A_DEFAULT = 1e4
B_DEFAULT = 2e4
P_REF = 1e7
C_GAS = 1e-6
WINDOW = PressureWindow(9e6, 1.1e7, 5)
RHO_REF = (1000.0, 800.0, 100.0)


@dataclass(frozen=True)
class Preset:
    name: str
    flow: FlowModel
    dataset: TwoPhaseDataset
    td: bool
    description: str = ""


def linear_curves(a=A_DEFAULT, b=B_DEFAULT, n=101) -> CapillaryCurves:
    s = np.linspace(0.0, 1.0, n)
    return CapillaryCurves.from_samples(s, -a * (1.0 - s), s, b * s)


def incompressible_phases(mu=(1.0, 1.0, 1.0), rho=RHO_REF):
    return tuple(PhaseModel(Phase(j + 1), rho[j], mu[j]) for j in range(3))


def compressible_phases(compressible=Phase.GAS, c=C_GAS, p_ref=P_REF, mu=(1.0, 1.0, 1.0), rho=RHO_REF):
    out = []
    for j in range(3):
        ph = Phase(j + 1)
        if ph is compressible:
            out.append(PhaseModel(ph, rho[j], mu[j], VolumeFactorKind.EXPONENTIAL, c, p_ref))
        else:
            out.append(PhaseModel(ph, rho[j], mu[j]))
    return tuple(out)


def dataset_from_kr(kr: ThreePhaseKr, curves: CapillaryCurves, n=201, name="traces") -> TwoPhaseDataset:
    """Sample the boundary traces of a three-phase kr model into edge tables."""
    t = np.linspace(0.0, 1.0, n)
    z = np.zeros_like(t)
    k12 = kr(t, z)
    k13 = kr(t, 1.0 - t)
    k23 = kr(z, t)
    tables = {
        "12": (Table(t, k12[0]), Table(t, k12[1])),
        "13": (Table(t, k13[0]), Table(t, k13[2])),
        "23": (Table(t, k23[2]), Table(t, k23[1])),
    }
    return TwoPhaseDataset(tables, curves, name=name)


def _make(name, kr, curves, phases, td, description, window=WINDOW):
    flow = FlowModel(kr, phases, curves, window)
    return Preset(name, flow, dataset_from_kr(kr, curves, name=name), td, description)


def get_preset(name: str, a=A_DEFAULT, b=B_DEFAULT, window=WINDOW) -> Preset:
    name = name.upper()
    if name == "ZERO":
        return _make(name, ThreePhaseKr.linear(), linear_curves(0.0, 0.0), incompressible_phases(),
                     True, "zero capillary pressure", window)
    if name == "LIN":
        return _make(name, ThreePhaseKr.linear(), linear_curves(a, b), incompressible_phases(),
                     True, "linear kr and Pc, incompressible", window)
    if name == "COREY":
        return _make(name, ThreePhaseKr.corey(2, 2, 2), linear_curves(a, b), incompressible_phases(),
                     False, "quadratic kr, violates the TD condition", window)
    if name == "GAS":
        return _make(name, ThreePhaseKr.linear(), linear_curves(0.0, b), compressible_phases(),
                     True, "compressible gas, Pc12 = 0", window)
    if name == "WOG":
        return _make(name, ThreePhaseKr.linear(), linear_curves(a, b), compressible_phases(),
                     False, "water-oil-gas: water/oil incompressible, gas compressible", window)
    if name == "WATERC":
        return _make(name, ThreePhaseKr.linear(), linear_curves(a, b), compressible_phases(Phase.WATER),
                     False, "compressible water; slope ordering violated", window)
    raise KeyError(f"unknown preset {name!r}")


PRESETS = ("ZERO", "LIN", "COREY", "GAS", "WOG", "WATERC")
