"""Command-line driver: ``tdglobal <command> --config case.json --out dir``.

Exit codes: 0 pass, 1 validation / compatibility / stability failure,
2 malformed config, missing files or numerical failure. Every run writes
``<command>.json`` into the output directory, also on failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from pathlib import Path

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import boundary as bd
from . import gcp, presets, reconstruct as rc, sim1d
from .fluids import DomainError, PhaseModel, PressureWindow
from .mesh import edge_point
from .twophase import load_dataset, validate, write_csv

OUT_ENV = "TDGLOBAL_OUT"
DEFAULT_OUT = "tdglobal_out"
COMMANDS = ("validate", "compat", "pcg", "stability", "interp", "reconstruct", "simulate")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "preset": {"enum": list(presets.PRESETS) + [p.lower() for p in presets.PRESETS]},
        "dataset": {"type": "string"},
        "phases": {"type": "array", "minItems": 3, "maxItems": 3, "items": {"type": "object"}},
        "seed": {"type": "integer"},
        "window": {
            "type": "object",
            "properties": {"p_min": _num, "p_max": _num, "n_nodes": {"type": "integer", "minimum": 2}},
            "required": ["p_min", "p_max"],
            "additionalProperties": False,
        },
        "perturb": {
            "type": "object",
            "properties": {"edge": {"enum": ["12", "13", "23"]}, "phase": {"enum": [1, 2, 3]}, "factor": _pos},
            "required": ["edge", "phase", "factor"],
            "additionalProperties": False,
        },
        "tolerances": {
            "type": "object",
            "properties": {"rtol": _pos, "atol": _pos, "td_tol": _pos, "compat_rel_tol": _pos,
                           "boundary_tol": _pos},
            "additionalProperties": False,
        },
        "pcg": {
            "type": "object",
            "properties": {"n_s": {"type": "integer", "minimum": 3}, "n_paths": _int},
            "additionalProperties": False,
        },
        "stability": {"type": "object", "properties": {"n_side": {"type": "integer", "minimum": 2}},
                      "additionalProperties": False},
        "interp": {"type": "object", "properties": {"n": _int}, "additionalProperties": False},
        "simulate": {
            "type": "object",
            "properties": {
                "formulation": {"enum": ["oil", "global", "both"]},
                "n_cells": {"type": "integer", "minimum": 3},
                "length": _pos, "p2_in": _num, "p2_out": _num, "t_end": _pos, "cfl": _pos, "dt": _pos,
                "n_output": {"type": "integer", "minimum": 0}, "field_ns": {"type": "integer", "minimum": 3},
                "s_in": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "s_init": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "rock": {"type": "object"},
            },
            "additionalProperties": False,
        },
    },
    "oneOf": [{"required": ["preset"]}, {"required": ["dataset"]}],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


class CheckFailed(Exception):
    """Raised internally to end a command with exit code 1."""


def load_config(path) -> dict:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {loc}: {exc.message}") from exc
    cfg["_base"] = str(path.parent)
    return cfg


def output_dir(arg: str | None) -> Path:
    out = Path(arg or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


class Case:
    """Resolved config: dataset, phases, window and (for presets) the flow model."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.seed = int(cfg.get("seed", 0))
        self.tol = cfg.get("tolerances", {})
        w = cfg.get("window")
        self.window = PressureWindow(w["p_min"], w["p_max"], w.get("n_nodes", 5)) if w else presets.WINDOW
        if "preset" in cfg:
            pre = presets.get_preset(cfg["preset"], window=self.window)
            self.name, self.dataset, self.flow, self.td = pre.name, pre.dataset, pre.flow, pre.td
            self.phases = pre.flow.phases
        else:
            path = Path(cfg["dataset"])
            if not path.is_absolute():
                path = Path(cfg["_base"]) / path
            self.dataset = load_dataset(path)
            self.name, self.flow, self.td = self.dataset.name, None, None
            self.phases = presets.incompressible_phases()
        if "phases" in cfg:
            self.phases = tuple(PhaseModel.from_dict(d) for d in cfg["phases"])
            if self.flow is not None:
                self.flow = type(self.flow)(self.flow.kr, self.phases, self.flow.curves, self.window)
        if "perturb" in cfg:
            p = cfg["perturb"]
            self.dataset = self.dataset.scaled(p["edge"], p["phase"], p["factor"])
            self.flow = None  # the three-phase model no longer matches its traces

    @property
    def compat_rel_tol(self) -> float:
        return float(self.tol.get("compat_rel_tol", 1e-8))

    def model(self):
        """Three-phase flow model; reconstructed from the traces when no preset model applies."""
        if self.flow is None:
            n = self.cfg.get("interp", {}).get("n", 16)
            recon = rc.reconstruct(self.dataset, self.phases, self.window.nodes(), n=n, rel_tol=self.compat_rel_tol)
            self.flow = recon.flow_model(self.window)
        return self.flow

    def context(self) -> gcp.GcpContext:
        kw = {k: float(self.tol[k]) for k in ("rtol", "atol", "td_tol") if k in self.tol}
        return gcp.GcpContext(self.model(), window=self.window, **kw)


def _write_report(out: Path, name: str, report: dict):
    (out / f"{name}.json").write_text(json.dumps(report, indent=2, default=_jsonable))
    flat = [(k, v) for k, v in report.items() if isinstance(v, (str, int, float, bool, np.generic)) and k != "traceback"]
    write_csv(out / f"{name}_summary.csv", ["key", "value"], flat)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


# --- commands -------------------------------------------------------------------


def cmd_validate(case: Case, out: Path) -> dict:
    issues = validate(case.dataset)
    write_csv(out / "validate.csv", ["code", "message", "detail"],
              [(i["code"], i["message"], json.dumps({k: v for k, v in i.items() if k not in ("code", "message")}))
               for i in issues])
    rep = {"dataset": case.dataset.name, "passed": not issues, "issues": issues}
    if issues:
        raise CheckFailed(rep)
    return rep


def cmd_compat(case: Case, out: Path) -> dict:
    rep = bd.compatibility_residual(case.dataset, case.phases, case.window.nodes(), rel_tol=case.compat_rel_tol)
    write_csv(out / "compat.csv", ["p", "residual_pa"], zip(rep.p_nodes, rep.residuals))
    d = rep.to_dict()
    if not rep.passed:
        raise CheckFailed(d)
    return d


def cmd_pcg(case: Case, out: Path) -> dict:
    ctx = case.context()
    opts = case.cfg.get("pcg", {})
    probe = gcp.td_probe(ctx, n_paths=opts.get("n_paths", 6), seed=case.seed)
    write_csv(out / "pcg_td_probe.csv", ["s1", "s3", "p", "spread_pa"],
              [(a, b, probe["p"], s) for (a, b), s in zip(gcp.TD_PROBES, probe["spreads"])])
    if not probe["td"]:
        raise CheckFailed({"passed": False, "td_probe": probe,
                           "message": "path spread exceeds tolerance: P_cg is not a potential for these data"})
    fld = gcp.build_field(ctx, n_s=opts.get("n_s", 33), window=case.window)
    fld.to_csv(out / "pcg.csv")
    return {"passed": True, "td_probe": probe, "n_s": fld.n_s, "pressure_nodes": list(fld.p_nodes),
            "stable": bool(fld.stable), "table": "pcg.csv"}


def cmd_stability(case: Case, out: Path) -> dict:
    ctx = case.context()
    n_side = case.cfg.get("stability", {}).get("n_side", 50)
    rep = gcp.stability_report(ctx, n_side=n_side)
    rows = []
    for k, p in enumerate(rep.p):
        rows += list(zip(rep.s1, rep.s3, np.full(len(rep.s1), p), rep.pcg[k], rep.dpdp[k]))
    write_csv(out / "stability.csv", ["s1", "s3", "p", "pcg", "dpcg_dp"], rows)
    d = rep.to_dict()
    d["passed"] = rep.slope_bounded
    if not rep.slope_bounded:
        raise CheckFailed(d)
    return d


def _interp_rows(recon: rc.Reconstruction):
    for k, p in enumerate(recon.p_nodes):
        mesh = recon.d_fields[k].mesh
        pcg_vals = recon.pcg_fields[k](mesh.s1, mesh.s3)
        d_vals = recon.d_fields[k](mesh.s1, mesh.s3)
        for a, b, v, dv in zip(mesh.s1, mesh.s3, pcg_vals, d_vals):
            yield (a, b, p, v, dv)


def cmd_interp(case: Case, out: Path) -> dict:
    n = case.cfg.get("interp", {}).get("n", 16)
    try:
        recon = rc.reconstruct(case.dataset, case.phases, case.window.nodes(), n=n, rel_tol=case.compat_rel_tol)
    except bd.CompatibilityError as exc:
        raise CheckFailed({"passed": False, "message": str(exc)}) from exc
    write_csv(out / "interp.csv", ["s1", "s3", "p", "pcg", "d"], _interp_rows(recon))
    t = np.linspace(0.0, 1.0, 101)
    worst = 0.0
    for k, p in enumerate(recon.p_nodes):
        for edge in ("12", "13", "23"):
            s1, s3 = edge_point(edge, t)
            worst = max(worst, float(np.max(np.abs(recon.pcg_fields[k](s1, s3) - recon.profiles.beta(edge, t, k=k)))))
    return {"passed": True, "n": n, "pressure_nodes": list(recon.p_nodes),
            "max_boundary_mismatch_pa": worst, "table": "interp.csv"}


def cmd_reconstruct(case: Case, out: Path) -> dict:
    n = case.cfg.get("interp", {}).get("n", 16)
    try:
        recon = rc.reconstruct(case.dataset, case.phases, case.window.nodes(), n=n, rel_tol=case.compat_rel_tol)
    except bd.CompatibilityError as exc:
        raise CheckFailed({"passed": False, "message": str(exc)}) from exc
    recon.export_csv(out / "reconstruct.csv")
    match = rc.verify_boundary_match(recon, tol=float(case.tol.get("boundary_tol", 1e-3)))
    td = rc.verify_td(recon, seed=case.seed)
    rep = {"passed": bool(match["passed"]), "boundary": match, "td": td, "table": "reconstruct.csv"}
    if not rep["passed"]:
        raise CheckFailed(rep)
    return rep


def cmd_simulate(case: Case, out: Path) -> dict:
    opts = dict(case.cfg.get("simulate", {}))
    which = opts.pop("formulation", "both")
    cfg = sim1d.case_from_dict(opts)
    model = case.model()
    fld = None
    if which != "oil":
        try:
            fld = gcp.build_field(gcp.GcpContext(model, window=case.window), n_s=cfg.field_ns, window=case.window)
        except gcp.TDViolation as exc:
            raise CheckFailed({"passed": False, "message": str(exc), "td_probe": exc.report}) from exc
        if not fld.stable:
            raise CheckFailed({"passed": False, "message": "1 - dP_cg/dp is not positive on the table"})
    if which == "both":
        rep, (sims, results) = sim1d.run_compare(model, cfg, fld)
        for sim, res in zip(sims, results):
            sim1d.write_timeseries(out / f"simulate_{res.formulation.value}.csv", sim, res)
        d = rep.to_dict()
        d["passed"] = True
        d["within_tolerance"] = rep.passed
        return d
    sim, res = sim1d.run(model, cfg, sim1d.Formulation(which), fld)
    sim1d.write_timeseries(out / f"simulate_{which}.csv", sim, res)
    return {"passed": True, "formulation": which, "steps": res.steps, "dt": res.dt,
            "max_mass_error": res.max_mass_error, "elapsed_s": res.elapsed}


HANDLERS = {
    "validate": cmd_validate,
    "compat": cmd_compat,
    "pcg": cmd_pcg,
    "stability": cmd_stability,
    "interp": cmd_interp,
    "reconstruct": cmd_reconstruct,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdglobal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON case file")
        p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        p.add_argument("--threads", type=int, default=None, help="cap on BLAS/OpenMP threads")
    return parser


def run_command(command: str, config: str, out: str | None = None, threads: int | None = None) -> int:
    out_dir = output_dir(out)
    report = {"command": command, "config": str(config)}
    code = 0
    try:
        with threadpool_limits(limits=threads):
            cfg = load_config(config)
            report.update(HANDLERS[command](Case(cfg), out_dir))
        report["status"] = "pass"
    except CheckFailed as exc:
        report.update(exc.args[0])
        report["status"] = "fail"
        code = 1
    except (bd.CompatibilityError, gcp.TDViolation, gcp.StabilityError) as exc:
        report.update(passed=False, status="fail", error=type(exc).__name__, message=str(exc))
        code = 1
    except (ConfigError, OSError, KeyError, DomainError, gcp.ODEFailure, sim1d.SimulationError,
            np.linalg.LinAlgError, ValueError, ArithmeticError) as exc:
        report.update(passed=False, status="error", error=type(exc).__name__, message=str(exc))
        if not isinstance(exc, (ConfigError, OSError)):
            report["traceback"] = traceback.format_exc(limit=3)
        code = 2
    report["exit_code"] = code
    _write_report(out_dir, command, report)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    code = run_command(args.command, args.config, args.out, args.threads)
    status = {0: "pass", 1: "fail", 2: "error"}[code]
    print(f"{args.command}: {status} ({output_dir(args.out) / (args.command + '.json')})")
    return code


if __name__ == "__main__":
    sys.exit(main())
