"""Two-phase edge data: relative permeability pairs and capillary pressure curves.

Saturation coordinates are reduced saturations on [0, 1]. Each table is
interpolated with a monotone cubic Hermite (PCHIP) interpolant, which keeps
the sign and monotonicity constraints of the capillary curves intact.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

SAT_TOL = 1e-12

EDGES = ("12", "13", "23")
# phases carried by each edge, in table-column order (kr_a, kr_b)
EDGE_PHASES = {"12": (1, 2), "13": (1, 3), "23": (3, 2)}


class SaturationRangeError(ValueError):
    pass


def check_unit(s, what="saturation"):
    s = np.asarray(s, dtype=float)
    if np.any(s < -SAT_TOL) | np.any(s > 1 + SAT_TOL) | np.any(~np.isfinite(s)):
        raise SaturationRangeError(f"{what} outside [0, 1]: {s[(s < 0) | (s > 1)].ravel()[:3]}")
    return np.clip(s, 0.0, 1.0)


def check_ternary(s1, s3):
    """Validate (s1, s3) against the ternary diagram and return clipped arrays."""
    s1 = check_unit(s1, "s1")
    s3 = check_unit(s3, "s3")
    if np.any(s1 + s3 > 1 + SAT_TOL):
        raise SaturationRangeError("s1 + s3 > 1")
    over = s1 + s3 - 1.0
    s3 = np.where(over > 0, s3 - over, s3)
    return s1, s3


@dataclass(frozen=True)
class TernarySaturation:
    s1: float
    s3: float

    def __post_init__(self):
        check_ternary(self.s1, self.s3)

    @property
    def s2(self) -> float:
        return 1.0 - self.s1 - self.s3


class Table:
    """Sample table with a PCHIP interpolant and its derivative."""

    def __init__(self, s, values):
        s = np.asarray(s, dtype=float)
        values = np.asarray(values, dtype=float)
        if s.ndim != 1 or s.shape != values.shape or s.size < 2:
            raise ValueError("table needs matching 1D arrays with at least two samples")
        if np.any(np.diff(s) <= 0):
            raise ValueError("saturation column must be strictly increasing")
        if abs(s[0]) > SAT_TOL or abs(s[-1] - 1) > SAT_TOL:
            raise ValueError("saturation column must span [0, 1]")
        self.s = s
        self.values = values
        self._f = PchipInterpolator(s, values)
        self._df = self._f.derivative()

    def __call__(self, s):
        return self._f(check_unit(s))

    def derivative(self, s):
        return self._df(check_unit(s))


@dataclass(frozen=True)
class CapillaryCurves:
    """Water-oil curve ``pc12(s1)`` and gas-oil curve ``pc32(s3)``, in Pa."""

    pc12_table: Table
    pc32_table: Table

    @classmethod
    def from_samples(cls, s12, pc12, s32, pc32) -> CapillaryCurves:
        return cls(Table(s12, pc12), Table(s32, pc32))

    def pc12(self, s1):
        return self.pc12_table(s1)

    def pc32(self, s3):
        return self.pc32_table(s3)

    def dpc12(self, s1):
        return self.pc12_table.derivative(s1)

    def dpc32(self, s3):
        return self.pc32_table.derivative(s3)

    def pc13(self, s1):
        s1 = check_unit(s1)
        return self.pc12(s1) - self.pc32(1.0 - s1)

    @property
    def scale(self) -> float:
        """max|Pc12| + max Pc32, the span of admissible capillary offsets."""
        return float(np.max(np.abs(self.pc12_table.values)) + np.max(np.abs(self.pc32_table.values)))


def pc12(curves, s1):
    return curves.pc12(s1)


def pc32(curves, s3):
    return curves.pc32(s3)


def dpc12(curves, s1):
    return curves.dpc12(s1)


def dpc32(curves, s3):
    return curves.dpc32(s3)


def pc13(curves, s1):
    return curves.pc13(s1)


@dataclass(frozen=True)
class TwoPhaseDataset:
    """The three edge data sets.

    ``kr[edge]`` is a pair of tables ``(kr_a, kr_b)`` for the phases listed in
    :data:`EDGE_PHASES`. Edge ``12`` and ``13`` use ``s1`` as coordinate, edge
    ``23`` uses ``s3``.
    """

    kr: dict
    curves: CapillaryCurves
    name: str = "dataset"
    meta: dict = field(default_factory=dict)

    def kr_edge(self, edge: str, phase: int, t):
        edge = str(edge)
        if edge not in EDGE_PHASES:
            raise ValueError(f"unknown edge {edge!r}")
        phases = EDGE_PHASES[edge]
        if phase not in phases:
            raise ValueError(f"phase {phase} is not present on edge {edge}")
        return self.kr[edge][phases.index(phase)](t)

    def scaled(self, edge: str, phase: int, factor: float) -> TwoPhaseDataset:
        """Copy with one kr table multiplied by ``factor`` (used for perturbation studies)."""
        idx = EDGE_PHASES[edge].index(phase)
        tables = list(self.kr[edge])
        old = tables[idx]
        tables[idx] = Table(old.s, old.values * factor)
        kr = dict(self.kr)
        kr[edge] = tuple(tables)
        return TwoPhaseDataset(kr, self.curves, name=f"{self.name}*{factor:g}", meta=dict(self.meta))


def kr_edge(dataset: TwoPhaseDataset, edge, phase, t):
    return dataset.kr_edge(edge, phase, t)


def validate(dataset: TwoPhaseDataset, n_probe: int = 1001, tol: float = 1e-9) -> list[dict]:
    """Return the list of violated invariants (empty when the dataset is valid)."""
    issues = []

    def add(code, msg, **where):
        issues.append({"code": code, "message": msg, **where})

    curves = dataset.curves
    pc12_t, pc32_t = curves.pc12_table, curves.pc32_table
    scale = max(curves.scale, 1.0)
    if abs(pc12_t.values[-1]) > tol * scale:
        add("pc12_endpoint", f"Pc12(1) != 0 (got {pc12_t.values[-1]:.6g} Pa)", s=1.0)
    if abs(pc32_t.values[0]) > tol * scale:
        add("pc32_endpoint", f"Pc32(0) != 0 (got {pc32_t.values[0]:.6g} Pa)", s=0.0)
    if np.any(pc12_t.values > tol * scale):
        i = int(np.argmax(pc12_t.values))
        add("pc12_sign", "Pc12 > 0", s=float(pc12_t.s[i]))
    if np.any(pc32_t.values < -tol * scale):
        i = int(np.argmin(pc32_t.values))
        add("pc32_sign", "Pc32 < 0", s=float(pc32_t.s[i]))
    if np.any(np.diff(pc12_t.values) < -tol * scale):
        add("pc12_monotone", "Pc12 samples decrease")
    if np.any(np.diff(pc32_t.values) < -tol * scale):
        add("pc32_monotone", "Pc32 samples decrease")

    probe = np.linspace(0.0, 1.0, n_probe)
    for edge, (pa, pb) in EDGE_PHASES.items():
        ta, tb = dataset.kr[edge]
        for ph, tab in ((pa, ta), (pb, tb)):
            v = tab.values
            if np.any(v < -tol) or np.any(v > 1 + tol):
                add("kr_range", f"kr{ph}^{edge} outside [0, 1]", edge=edge, phase=ph)
        # the saturation of phase a is t on edges 12/13; phase b has saturation 1 - t
        if abs(ta.values[0]) > tol:
            add("kr_residual", f"kr{pa}^{edge} != 0 where its saturation vanishes", edge=edge, phase=pa)
        if abs(tb.values[-1]) > tol:
            add("kr_residual", f"kr{pb}^{edge} != 0 where its saturation vanishes", edge=edge, phase=pb)
        both = (ta(probe) <= tol) & (tb(probe) <= tol)
        interior = (probe > 0) & (probe < 1)
        if np.any(both & interior):
            add("kr_degenerate", f"both kr vanish inside edge {edge}", edge=edge,
                t=float(probe[both & interior][0]))

    k12, k13, k23 = dataset.kr["12"], dataset.kr["13"], dataset.kr["23"]
    if abs(k12[0].values[-1] - k13[0].values[-1]) > tol:
        add("corner_water", "kr1^12(1) != kr1^13(1)", corner="water")
    if abs(k12[1].values[0] - k23[1].values[0]) > tol:
        add("corner_oil", "kr2^12(0) != kr2^23(0)", corner="oil")
    if abs(k13[1].values[0] - k23[0].values[-1]) > tol:
        add("corner_gas", "kr3^13(0) != kr3^23(1)", corner="gas")
    return issues


# --- file formats -----------------------------------------------------------


def read_csv_columns(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = [row for row in reader]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return {k.strip(): np.array([float(r[k]) for r in rows]) for k in reader.fieldnames}


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def load_dataset(manifest_path) -> TwoPhaseDataset:
    """Load a dataset from a JSON manifest binding the five CSV files.

    Manifest keys: ``edge12``, ``edge13``, ``edge23`` (CSV ``s,kr_a,kr_b``),
    ``pc12``, ``pc32`` (CSV ``s,pc``). Relative paths resolve against the
    manifest's directory.
    """
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    kr = {}
    for edge in EDGES:
        cols = read_csv_columns(base / manifest[f"edge{edge}"])
        kr[edge] = (Table(cols["s"], cols["kr_a"]), Table(cols["s"], cols["kr_b"]))
    c12 = read_csv_columns(base / manifest["pc12"])
    c32 = read_csv_columns(base / manifest["pc32"])
    curves = CapillaryCurves.from_samples(c12["s"], c12["pc"], c32["s"], c32["pc"])
    return TwoPhaseDataset(kr, curves, name=manifest.get("name", manifest_path.stem))


def save_dataset(dataset: TwoPhaseDataset, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"name": dataset.name}
    for edge in EDGES:
        ta, tb = dataset.kr[edge]
        fname = f"edge{edge}.csv"
        write_csv(directory / fname, ["s", "kr_a", "kr_b"], zip(ta.s, ta.values, tb(ta.s)))
        manifest[f"edge{edge}"] = fname
    for key, tab in (("pc12", dataset.curves.pc12_table), ("pc32", dataset.curves.pc32_table)):
        write_csv(directory / f"{key}.csv", ["s", "pc"], zip(tab.s, tab.values))
        manifest[key] = f"{key}.csv"
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path
