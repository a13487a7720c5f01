"""Per-phase property models: volume factor, viscosity, mobility, density.

All evaluations accept scalars or numpy arrays. Pressures are in Pa.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np


class DomainError(ValueError):
    """A phase property was requested outside its admissible pressure range."""


class Phase(enum.IntEnum):
    WATER = 1
    OIL = 2
    GAS = 3


class VolumeFactorKind(str, enum.Enum):
    CONSTANT = "constant"
    LINEAR = "linear"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class PressureWindow:
    p_min: float
    p_max: float
    n_nodes: int = 5

    def __post_init__(self):
        if not self.p_min < self.p_max:
            raise ValueError(f"p_min must be < p_max, got {self.p_min}, {self.p_max}")
        if self.n_nodes < 2:
            raise ValueError(f"n_nodes must be >= 2, got {self.n_nodes}")

    def nodes(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.n_nodes)

    def widened(self, margin: float) -> tuple[float, float]:
        return self.p_min - margin, self.p_max + margin


@dataclass(frozen=True)
class PhaseModel:
    """Thermodynamic model of one phase.

    ``B(p)`` is one of ``1``, ``1 + c (p - p_ref)`` or ``exp(c (p - p_ref))``;
    the viscosity is constant. ``valid_range`` is the (widened) pressure range
    on which evaluations are allowed; ``None`` disables the check.
    """

    phase: Phase
    rho_ref: float
    mu: float
    kind: VolumeFactorKind = VolumeFactorKind.CONSTANT
    c: float = 0.0
    p_ref: float = 0.0
    valid_range: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "phase", Phase(self.phase))
        object.__setattr__(self, "kind", VolumeFactorKind(self.kind))
        if self.mu <= 0:
            raise ValueError(f"{self.phase.name.lower()}: viscosity must be positive")
        if self.rho_ref <= 0:
            raise ValueError(f"{self.phase.name.lower()}: reference density must be positive")
        if self.kind is VolumeFactorKind.LINEAR and self.valid_range is not None:
            lo, hi = self.valid_range
            if min(1 + self.c * (lo - self.p_ref), 1 + self.c * (hi - self.p_ref)) <= 0:
                raise ValueError(
                    f"{self.phase.name.lower()}: linear volume factor is not positive on {self.valid_range}"
                )

    @property
    def name(self) -> str:
        return self.phase.name.lower()

    @property
    def is_compressible(self) -> bool:
        return self.kind is not VolumeFactorKind.CONSTANT and self.c != 0.0

    def with_range(self, lo: float, hi: float) -> PhaseModel:
        return replace(self, valid_range=(float(lo), float(hi)))

    def _check(self, p):
        p = np.asarray(p, dtype=float)
        if self.valid_range is not None:
            lo, hi = self.valid_range
            bad = (p < lo) | (p > hi) | ~np.isfinite(p)
            if np.any(bad):
                raise DomainError(
                    f"{self.name} pressure {np.asarray(p)[bad].ravel()[:3]} Pa outside [{lo:.6g}, {hi:.6g}]"
                )
        return p

    def volume_factor(self, p):
        p = self._check(p)
        if self.kind is VolumeFactorKind.CONSTANT:
            return np.ones_like(p)
        if self.kind is VolumeFactorKind.LINEAR:
            return 1.0 + self.c * (p - self.p_ref)
        return np.exp(self.c * (p - self.p_ref))

    def mobility(self, p):
        return self.volume_factor(p) / self.mu

    def density(self, p):
        return self.rho_ref * self.volume_factor(p)

    def log_mobility_slope(self, p):
        """d'(p)/d(p), in 1/Pa."""
        p = self._check(p)
        if self.kind is VolumeFactorKind.CONSTANT:
            return np.zeros_like(p)
        if self.kind is VolumeFactorKind.LINEAR:
            return self.c / (1.0 + self.c * (p - self.p_ref))
        return np.full_like(p, self.c)

    def to_dict(self) -> dict:
        out = {"phase": self.name, "rho_ref": self.rho_ref, "mu": self.mu}
        vf = {"type": self.kind.value}
        if self.kind is not VolumeFactorKind.CONSTANT:
            vf.update(c=self.c, p_ref=self.p_ref)
        out["volume_factor"] = vf
        return out

    @classmethod
    def from_dict(cls, data: dict) -> PhaseModel:
        vf = data.get("volume_factor", {"type": "constant"})
        return cls(
            phase=Phase[data["phase"].upper()],
            rho_ref=float(data["rho_ref"]),
            mu=float(data["mu"]),
            kind=VolumeFactorKind(vf.get("type", "constant")),
            c=float(vf.get("c", 0.0)),
            p_ref=float(vf.get("p_ref", 0.0)),
        )


def mobility(model: PhaseModel, p):
    return model.mobility(p)


def log_mobility_slope(model: PhaseModel, p):
    return model.log_mobility_slope(p)


def density(model: PhaseModel, p):
    return model.density(p)


def slope_ordering_holds(phases, p_grid) -> bool:
    """Check d3'/d3 >= d2'/d2 >= d1'/d1 on a pressure grid (same p for all phases)."""
    w, o, g = (ph.log_mobility_slope(p_grid) for ph in phases)
    return bool(np.all(g >= o) and np.all(o >= w))
