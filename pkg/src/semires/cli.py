"""Configuration-driven command line front end.

Subcommands map one-to-one onto the pipeline stages:

* ``orbit``        locate the seed orbit and its continuation family
* ``floquet``      section monodromy and classified spectrum at the center
* ``action``       per-energy action table (CSV: E, S0, T, Re_S1, Im_S1, g)
* ``index``        winding-index report (JSON)
* ``resonances``   full chain, labelled resonance table (CSV or JSON)
* ``verify``       non-resonance scan of the Floquet exponents
* ``verify-model`` three-way model comparison (closed form / solver / zeta)

Outputs are byte-deterministic for a fixed configuration: rows are sorted,
floats use the shortest round-trip representation, and timing data is only
emitted when explicitly requested.

Exit codes: 0 success, 2 convergence failure, 3 non-resonance violation in
strict mode, 4 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys as _sys
from pathlib import Path

import numpy as np
import jsonschema

from . import __version__
from .bs import BSConfig, ResonanceSweep, compute_resonances
from .dynsys import HamiltonianSystem, PhaseState, make_builtin
from .errors import ConfigError, SemiclassicalError
from .model_oracle import ModelSpec, model_exact_resonances, zeta_zeros
from .pipeline import analyze_family, build_family, resonance_pipeline

EXIT_OK = 0
EXIT_CONVERGENCE = 2
EXIT_NONRESONANT = 3
EXIT_CONFIG = 4

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["system", "h", "eps0"],
    "additionalProperties": False,
    "properties": {
        "system": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["model", "hyperboloid", "coulomb_stark"]},
                "params": {"type": "object"},
            },
        },
        "h": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
        "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "eps0": {"type": "number", "exclusiveMinimum": 0},
        "k_cap_const": {"type": "number", "exclusiveMinimum": 0},
        "window_center": {"type": "number"},
        "orbit_guess": {
            "type": "object",
            "required": ["state", "period"],
            "additionalProperties": False,
            "properties": {
                "state": {
                    "type": "object",
                    "required": ["y", "eta"],
                    "additionalProperties": False,
                    "properties": {
                        "y": {"type": "array", "items": {"type": "number"}, "minItems": 2},
                        "eta": {"type": "array", "items": {"type": "number"}, "minItems": 2},
                    },
                },
                "period": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "e_min": {"type": "number"},
                "e_max": {"type": "number"},
                "n_energies": {"type": "integer", "minimum": 5},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "flow": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-6},
                "newton": {"type": "number", "exclusiveMinimum": 0},
                "quadrature": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "nonres": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k_max": {"type": "integer", "minimum": 0, "maximum": 30},
                "tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "format": {"enum": ["csv", "json"]},
                "path": {"type": "string"},
            },
        },
    },
}

# defaults for every omitted field (documented in the README)
DEFAULTS = {
    "delta": 0.5,
    "k_cap_const": 1.0,
    "window_center": 0.0,
    "grid": {"n_energies": 11},
    "tolerances": {"flow": 1e-12, "newton": 1e-10, "quadrature": 1e-9},
    "nonres": {"k_max": 10, "tol": 1e-9},
    "output": {"format": "csv"},
}


def load_config(path: str | Path) -> dict:
    """Read, schema-validate and default-fill a run configuration."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        field = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(exc.message, field_path=field) from exc
    cfg = dict(raw)
    for key, val in DEFAULTS.items():
        if isinstance(val, dict):
            merged = dict(val)
            merged.update(cfg.get(key, {}))
            cfg[key] = merged
        else:
            cfg.setdefault(key, val)
    return cfg


def _build_system(cfg: dict) -> HamiltonianSystem:
    spec = cfg["system"]
    try:
        return make_builtin(spec["kind"], spec.get("params", {}))
    except ValueError as exc:
        raise ConfigError(str(exc), field_path="system/params") from exc


def _bs_config(cfg: dict) -> BSConfig:
    try:
        return BSConfig(h=cfg["h"], eps0=cfg["eps0"], delta=cfg["delta"],
                        k_cap_const=cfg["k_cap_const"],
                        newton_tol=cfg["tolerances"]["newton"],
                        e_center=cfg["window_center"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _guess(cfg: dict):
    og = cfg.get("orbit_guess")
    if og is None:
        return None
    return (PhaseState(np.array(og["state"]["y"]), np.array(og["state"]["eta"])),
            float(og["period"]))


def _grid_bounds(cfg: dict):
    grid = cfg["grid"]
    return grid.get("e_min"), grid.get("e_max"), grid["n_energies"]


# ---------------------------------------------------------------------------
# deterministic serialization


def _fnum(x) -> str:
    return repr(float(x))


def _json_ready(obj):
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return [_json_ready(v) for v in obj.tolist()]
    return obj


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        _sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _resonance_csv(sweep: ResonanceSweep, d: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["m"] + [f"k_{j + 1}" for j in range(d)]
                    + ["re_E", "im_E", "residual", "iters", "in_window", "warn_nonres"])
    for r in sweep.resonances:
        writer.writerow([r.m, *r.k, _fnum(r.energy.real), _fnum(r.energy.imag),
                         _fnum(r.residual), r.iters,
                         "true" if r.in_window else "false",
                         "true" if r.warn_nonres else "false"])
    return buf.getvalue()


def _resonance_rows(sweep: ResonanceSweep) -> list[dict]:
    return [{
        "m": r.m, "k": list(r.k),
        "re_E": float(r.energy.real), "im_E": float(r.energy.imag),
        "residual": float(r.residual), "iters": r.iters,
        "in_window": r.in_window, "warn_nonres": r.warn_nonres,
        "merged_labels": [[m, list(k)] for m, k in r.merged_labels],
    } for r in sweep.resonances]


def _emit(cfg: dict, out_path: str | None, fmt: str | None, payload: dict,
          csv_text: str | None, with_timings: bool, timings) -> None:
    fmt = fmt or cfg["output"]["format"]
    path = out_path or cfg["output"].get("path")
    if fmt == "csv" and csv_text is not None:
        _write_text(path, csv_text)
        return
    doc = {
        "config_echo": _json_ready(cfg),
        "results": _json_ready(payload),
        "warnings": payload.get("warnings", []),
        "timings": _json_ready(timings) if with_timings else None,
    }
    _write_text(path, json.dumps(doc, indent=2) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def _analysis(sys_: HamiltonianSystem, bscfg: BSConfig, cfg: dict,
              need_sweep: bool):
    e_min, e_max, n_grid = _grid_bounds(cfg)
    if need_sweep:
        return resonance_pipeline(
            sys_, bscfg, e_min=e_min, e_max=e_max, n_grid=n_grid, guess=_guess(cfg),
            orbit_tol=cfg["tolerances"]["newton"], flow_tol=cfg["tolerances"]["flow"],
            nonres_k_max=cfg["nonres"]["k_max"], nonres_tol=cfg["nonres"]["tol"])
    family = build_family(sys_, bscfg, e_min=e_min, e_max=e_max, n_grid=n_grid,
                          guess=_guess(cfg), orbit_tol=cfg["tolerances"]["newton"])
    analysis = analyze_family(sys_, family, flow_tol=cfg["tolerances"]["flow"],
                              im_band=1.1 * bscfg.depth + bscfg.h,
                              nonres_k_max=cfg["nonres"]["k_max"],
                              nonres_tol=cfg["nonres"]["tol"])
    return analysis, None


def cmd_orbit(cfg, bscfg, sys_, args) -> tuple[int, dict, str | None]:
    analysis, _ = _analysis(sys_, bscfg, cfg, need_sweep=False)
    orbits = [{
        "energy": o.energy, "period": o.period,
        "closure_error": o.closure_error,
        "base_y": list(o.base_point.y), "base_eta": list(o.base_point.eta),
    } for o in analysis.family.orbits]
    return EXIT_OK, {"orbits": orbits, "warnings": []}, None


def cmd_floquet(cfg, bscfg, sys_, args) -> tuple[int, dict, str | None]:
    analysis, _ = _analysis(sys_, bscfg, cfg, need_sweep=False)
    mid = len(analysis.family.orbits) // 2
    spec = analysis.spectra[mid]
    payload = {
        "energy": spec.energy,
        "multipliers": [complex(l) for l in spec.multipliers],
        "exponents": [complex(m) for m in spec.exponents],
        "classes": spec.classes,
        "first_kind": [bool(b) for b in spec.first_kind],
        "selected": [int(i) for i in spec.selected],
        "warnings": [],
    }
    return EXIT_OK, payload, None


def cmd_action(cfg, bscfg, sys_, args) -> tuple[int, dict, str | None]:
    analysis, _ = _analysis(sys_, bscfg, cfg, need_sweep=False)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["E", "S0", "T", "Re_S1", "Im_S1", "g"])
    for a in analysis.actions:
        writer.writerow([_fnum(a.energy), _fnum(a.s0), _fnum(a.t_period),
                         _fnum(a.s1.real), _fnum(a.s1.imag), a.g])
    rows = [{"E": a.energy, "S0": a.s0, "T": a.t_period, "Re_S1": a.s1.real,
             "Im_S1": a.s1.imag, "g": a.g} for a in analysis.actions]
    mid = len(analysis.family.orbits) // 2
    fit = analysis.fit
    stage = {
        "grid": list(fit.data["grid"]),
        "s0": list(fit.data["s0"]),
        "t": list(fit.data["t"]),
        "s1": [[v.real, v.imag] for v in fit.data["s1"]],
        "mu": [[[v.real, v.imag] for v in row] for row in fit.data["mu"]],
        "g": fit.g,
        "im_band": fit.im_band,
        "nonres_mu": [[v.real, v.imag] for v in analysis.spectra[mid].selected_exponents],
    }
    return EXIT_OK, {"actions": rows, "stage": stage, "warnings": []}, buf.getvalue()


def cmd_index(cfg, bscfg, sys_, args) -> tuple[int, dict, str | None]:
    analysis, _ = _analysis(sys_, bscfg, cfg, need_sweep=False)
    payload = analysis.index.to_dict()
    payload["warnings"] = []
    return EXIT_OK, payload, None


def _sweep_from_stage(path: str, bscfg: BSConfig, cfg: dict):
    """Rebuild the fitted data from serialized stage output and sweep it."""
    from .action import fit_from_arrays
    from .floquet import scan_nonresonance

    stage = json.loads(Path(path).read_text(encoding="utf-8"))
    if "results" in stage:
        stage = stage["results"]["stage"]
    fit = fit_from_arrays(
        np.array(stage["grid"]), np.array(stage["s0"]), np.array(stage["t"]),
        np.array([complex(re, im) for re, im in stage["s1"]]),
        np.array([[complex(re, im) for re, im in row] for row in stage["mu"]]),
        stage["g"], im_band=stage["im_band"])
    nonres = scan_nonresonance([complex(re, im) for re, im in stage["nonres_mu"]],
                               k_max=cfg["nonres"]["k_max"], tol=cfg["nonres"]["tol"])
    return fit, compute_resonances(fit, bscfg, nonres=nonres)


def cmd_resonances(cfg, bscfg, sys_, args) -> tuple[int, dict, str | None]:
    if args.from_stage:
        fit, sweep = _sweep_from_stage(args.from_stage, bscfg, cfg)
        d = fit.n_selected
    else:
        analysis, sweep = _analysis(sys_, bscfg, cfg, need_sweep=True)
        d = analysis.fit.n_selected
    warnings = []
    if sweep.warn_nonres:
        warnings.append("strong non-resonance condition violated; labels may collide")
    if args.strict and sweep.warn_nonres:
        return EXIT_NONRESONANT, {"resonances": _resonance_rows(sweep),
                                  "warnings": warnings}, None
    payload = {"resonances": _resonance_rows(sweep),
               "skipped": [[m, list(k), msg] for m, k, msg in sweep.skipped],
               "warnings": warnings}
    return EXIT_OK, payload, _resonance_csv(sweep, d)


def cmd_verify(cfg, bscfg, sys_, args) -> tuple[int, dict, str | None]:
    analysis, _ = _analysis(sys_, bscfg, cfg, need_sweep=False)
    report = analysis.nonres.to_dict()
    warnings = []
    code = EXIT_OK
    if analysis.nonres.violations_strong:
        warnings.append("strong non-resonance condition violated")
        if args.strict:
            code = EXIT_NONRESONANT
    report["warnings"] = warnings
    return code, report, None


def cmd_verify_model(cfg, bscfg, sys_, args) -> tuple[int, dict, str | None]:
    if sys_.meta.get("kind") != "model":
        raise ConfigError("verify-model requires system.kind == 'model'")
    analysis, sweep = _analysis(sys_, bscfg, cfg, need_sweep=True)
    mspec = ModelSpec.from_system(sys_, bscfg.h)
    exact = model_exact_resonances(mspec, bscfg)
    zg = zeta_zeros(mspec, bscfg)
    tol = 1e-8

    solver = [r.energy for r in sweep.resonances]
    oracle = [r.energy for r in exact]
    zeros = list(zg.located_zeros)
    rows = []
    worst = 0.0
    ok = len(solver) == len(oracle) == len(zeros)
    for e in sorted(oracle, key=lambda z: (z.real, z.imag)):
        db = min((abs(e - s) for s in solver), default=np.inf)
        dz = min((abs(e - z) for z in zeros), default=np.inf)
        worst = max(worst, db, dz)
        rows.append({"re_E": e.real, "im_E": e.imag, "d_solver": db, "d_zeta": dz})
    ok = ok and worst <= tol
    table = io.StringIO()
    table.write(f"{'re_E':>22} {'im_E':>22} {'|d_solver|':>12} {'|d_zeta|':>12}\n")
    for r in rows:
        table.write(f"{r['re_E']:>22.15g} {r['im_E']:>22.15g} "
                    f"{r['d_solver']:>12.3e} {r['d_zeta']:>12.3e}\n")
    table.write(f"counts: oracle={len(oracle)} solver={len(solver)} zeta={len(zeros)}; "
                f"max distance {worst:.3e}; tolerance {tol:g}; "
                f"{'AGREE' if ok else 'DISAGREE'}\n")
    payload = {"agree": ok, "max_distance": worst,
               "counts": {"oracle": len(oracle), "solver": len(solver),
                          "zeta": len(zeros)},
               "rows": rows, "warnings": [] if ok else ["three-way comparison failed"]}
    return (EXIT_OK if ok else EXIT_CONVERGENCE), payload, table.getvalue()


_COMMANDS = {
    "orbit": cmd_orbit,
    "floquet": cmd_floquet,
    "action": cmd_action,
    "index": cmd_index,
    "resonances": cmd_resonances,
    "verify": cmd_verify,
    "verify-model": cmd_verify_model,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semires",
        description="Semiclassical resonances of a trapping periodic orbit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--format", choices=["csv", "json"], default=None)
        p.add_argument("--strict", action="store_true",
                       help="exit 3 on strong non-resonance violations")
        p.add_argument("--threads", type=int, default=1,
                       help="accepted for interface compatibility; the sweep "
                            "is deterministic regardless")
        p.add_argument("--seed-energy", type=float, default=None,
                       help="override the window center energy")
        p.add_argument("--timings", action="store_true",
                       help="include wall-clock timings in JSON output")
        if name == "resonances":
            p.add_argument("--from-stage", default=None, metavar="FILE",
                           help="JSON output of the `action` subcommand; skip "
                                "the dynamics and sweep the serialized fit")
    return parser


def main(argv=None) -> int:
    import time

    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed_energy is not None:
            cfg["window_center"] = args.seed_energy
        sys_ = _build_system(cfg)
        bscfg = _bs_config(cfg)
        t0 = time.perf_counter()
        code, payload, csv_text = _COMMANDS[args.command](cfg, bscfg, sys_, args)
        timings = {"total_s": time.perf_counter() - t0}
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except SemiclassicalError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CONVERGENCE
    _emit(cfg, args.out, args.format, payload, csv_text, args.timings, timings)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
