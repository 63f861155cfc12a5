"""Command-line front end.

Subcommands: ``limit``, ``annulus``, ``thin2d``, ``converge``, ``validate``.
Options come from ``--config`` (a JSON file) with command-line flags taking
precedence.  Exit status is 0 on success, 1 when a solver fails (a JSON error
object naming the module and error kind is written to stderr) and 2 for usage
or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import annulus, limit1d, thin2d
from .bessel import bessel_quad, wronskian_residuals
from .curve import (
    curve_from_json,
    gauss_bonnet_residual,
    make_circle,
    make_ellipse,
    make_fourier_curvature,
    max_admissible_h,
    width_from_json,
)
from .errors import InvalidArgumentError, ThinPlateError
from .numerics import Spectrum, richardson_limit

COMMANDS = ("limit", "annulus", "thin2d", "converge", "validate")
FORMATS = ("csv", "json", "svg")
DEFAULT_N = {"limit": 16, "annulus": 16, "thin2d": 8, "converge": 8, "validate": 16}

_CURVE_SCHEMA = {
    "oneOf": [
        {"type": "object", "required": ["type", "radius"], "additionalProperties": False,
         "properties": {"type": {"const": "circle"}, "radius": {"type": "number", "exclusiveMinimum": 0}}},
        {"type": "object", "required": ["type", "a", "b"], "additionalProperties": False,
         "properties": {"type": {"const": "ellipse"}, "a": {"type": "number", "exclusiveMinimum": 0},
                        "b": {"type": "number", "exclusiveMinimum": 0}}},
        {"type": "object", "required": ["type", "length"], "additionalProperties": False,
         "properties": {"type": {"const": "fourier-curvature"}, "length": {"type": "number", "exclusiveMinimum": 0},
                        "cos": {"type": "array", "items": {"type": "number"}},
                        "sin": {"type": "array", "items": {"type": "number"}}}},
    ]
}
_WIDTH_SCHEMA = {
    "type": "object", "required": ["mean"], "additionalProperties": False,
    "properties": {"mean": {"type": "number"}, "cos": {"type": "array", "items": {"type": "number"}},
                   "sin": {"type": "array", "items": {"type": "number"}}},
}
CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "curve": _CURVE_SCHEMA,
        "h": {"type": "number", "exclusiveMinimum": 0},
        "h_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "N": {"type": "integer", "minimum": 4},
        "p": {"type": "integer", "minimum": 2},
        "n_modes": {"type": "integer", "minimum": 1},
        "g": _WIDTH_SCHEMA,
        "ell": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "output": {"type": "string"},
        "formats": {"type": "array", "items": {"enum": list(FORMATS)}},
    },
}

_NUM_OR_NULL = {"type": ["number", "null"]}
OUTPUT_SCHEMAS = {
    "limit": {
        "type": "object",
        "required": ["curve", "N", "method", "eigenvalues", "multiplicity", "u_vectors", "w_vectors"],
        "properties": {"eigenvalues": {"type": "array", "items": {"type": "number"}},
                       "multiplicity": {"type": "array", "items": {"type": "integer"}},
                       "u_vectors": {"type": "array", "items": {"type": "array"}},
                       "w_vectors": {"type": "array", "items": {"type": "array"}}},
    },
    "annulus": {
        "type": "object", "required": ["branches"],
        "properties": {"branches": {"type": "array", "items": {
            "type": "object", "required": ["ell", "limit", "points"],
            "properties": {"ell": {"type": "integer"}, "limit": {"type": "number"},
                           "error": {"type": "string"},
                           "points": {"type": "array", "items": {
                               "type": "object", "required": ["h", "mu", "det_residual"]}}}}}},
    },
    "thin2d": {
        "type": "object", "required": ["curve", "N", "p", "results"],
        "properties": {"results": {"type": "array", "items": {
            "type": "object", "required": ["h", "eigenvalues", "multiplicity", "rho_min"]}}},
    },
    "converge": {
        "type": "object", "required": ["curve", "N", "p", "h", "eta", "rows", "extrapolated", "failures"],
        "properties": {"rows": {"type": "array", "items": {
            "type": "object", "required": ["h", "j", "mu_h", "eta_limit", "abs_err", "rate"],
            "properties": {"mu_h": _NUM_OR_NULL, "abs_err": _NUM_OR_NULL, "rate": _NUM_OR_NULL}}},
            "extrapolated": {"type": "object", "additionalProperties": _NUM_OR_NULL}},
    },
    "validate": {
        "type": "object", "required": ["checks", "passed"],
        "properties": {"passed": {"type": "boolean"}, "checks": {"type": "array", "items": {
            "type": "object", "required": ["name", "passed", "value", "tolerance"]}}},
    },
}


class ConfigError(Exception):
    """Configuration that fails validation (exit status 2)."""


@dataclass
class RunConfig:
    command: str
    curve: dict = field(default_factory=lambda: {"type": "circle", "radius": 1.0})
    h: float = 0.1
    h_grid: list = field(default_factory=lambda: [0.2, 0.1, 0.05])
    N: Optional[int] = None
    p: int = 8
    n_modes: int = 8
    g: Optional[dict] = None
    ell: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    output: Optional[str] = None
    formats: list = field(default_factory=lambda: ["csv", "json"])

    def __post_init__(self):
        if self.N is None:
            self.N = DEFAULT_N[self.command]


def _parse_list(text: str, kind=float) -> list:
    try:
        return [kind(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None


def _parse_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"invalid JSON: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thinplate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("limit", "limiting eigenvalues on the curve"),
        ("annulus", "annulus eigencurves from Bessel dispersion determinants"),
        ("thin2d", "strip eigenvalues for one or more widths"),
        ("converge", "convergence table and plot of strip eigenvalues towards the limit"),
        ("validate", "run the invariant suite on the built-in corpus"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--curve", type=_parse_json, help="curve JSON, e.g. '{\"type\":\"circle\",\"radius\":1}'")
        p.add_argument("--h", type=float, help="strip width")
        p.add_argument("--h-grid", type=_parse_list, help="comma-separated descending widths")
        p.add_argument("--modes", type=int, dest="n_modes", help="number of eigenvalues")
        p.add_argument("--N", type=int, help="Fourier order in s")
        p.add_argument("--p", type=int, help="polynomial degree in t")
        p.add_argument("--g", type=_parse_json, help="width profile JSON (limit only)")
        p.add_argument("--ell", type=lambda t: _parse_list(t, int), help="comma-separated angular modes")
        p.add_argument("--out", dest="output", help="output directory (default: print to stdout)")
        p.add_argument("--format", type=lambda t: _parse_list(t, str), dest="formats", help="subset of csv,json,svg")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    raw: dict = {}
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    for key in ("curve", "h", "h_grid", "n_modes", "N", "p", "g", "ell", "output", "formats"):
        val = getattr(args, key, None)
        if val is not None:
            raw[key] = val
    if raw.get("command", args.command) != args.command:
        raise ConfigError(f"config is for command {raw['command']!r}, not {args.command!r}")
    raw["command"] = args.command
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc.message}") from None
    cfg = RunConfig(**raw)
    if cfg.h_grid and any(b >= a for a, b in zip(cfg.h_grid, cfg.h_grid[1:])):
        raise ConfigError("h_grid must be strictly descending")
    if cfg.command in ("thin2d", "converge"):
        curve = curve_from_json(cfg.curve)
        if curve.has_embedding:
            hstar = max_admissible_h(curve)
            widths = [cfg.h] if cfg.command == "thin2d" and "h_grid" not in raw else cfg.h_grid
            bad = [h for h in widths if h >= hstar]
            if bad:
                raise ConfigError(f"widths {bad} are not below 1/max(curvature) = {hstar:.6g}")
    return cfg


# ---------------------------------------------------------------- commands


def _spectrum_rows(spec: Spectrum) -> list:
    return [(j, float(v), m) for j, (v, m) in enumerate(zip(spec.eigenvalues, spec.multiplicities()), start=1)]


def run_limit(cfg: RunConfig) -> dict:
    curve = curve_from_json(cfg.curve)
    g = width_from_json(cfg.g) if cfg.g else None
    pencil = limit1d.assemble_limit_system(curve, cfg.N, g)
    spec = limit1d.solve_limit_eigs(pencil, cfg.n_modes)
    return {
        "csv": {"limit_spectrum.csv": limit1d.spectrum_to_csv(spec)},
        "json": {"limit_spectrum.json": limit1d.spectrum_to_json(spec, pencil)},
        "schema": "limit",
    }


def _track(ell: int, h_grid: list) -> dict:
    entry = {"ell": ell, "limit": annulus.limit_eigenvalue(ell), "points": []}
    try:
        hint = 0.0 if ell <= 1 else annulus.lowest_branch_hint(ell, h_grid[0])
        pts = annulus.find_eigencurve(ell, h_grid, hint)
    except ThinPlateError as exc:
        pts = getattr(exc, "points", [])
        entry["error"] = f"{exc.module}/{exc.kind}: {exc}"
    entry["points"] = [{"h": p.h, "mu": p.mu, "det_residual": p.det_residual} for p in pts]
    entry["_pts"] = pts
    return entry


def run_annulus(cfg: RunConfig) -> dict:
    with ThreadPoolExecutor(max_workers=thin2d.thread_count()) as pool:
        branches = list(pool.map(lambda ell: _track(ell, cfg.h_grid), cfg.ell))
    csvs = {f"eigencurve_l{b['ell']}.csv": annulus.eigencurves_to_csv(b.pop("_pts")) for b in branches}
    out = {"csv": csvs, "json": {"annulus.json": {"branches": branches}}, "schema": "annulus"}
    failed = [b for b in branches if "error" in b]
    if failed:
        out["error"] = {"module": "annulus", "kind": "branch-lost", "message": failed[0]["error"]}
    return out


def run_thin2d(cfg: RunConfig, explicit_grid: bool) -> dict:
    curve = curve_from_json(cfg.curve)
    basis = thin2d.TensorBasis(curve, cfg.N, cfg.p)
    widths = cfg.h_grid if explicit_grid else [cfg.h]
    lines = ["h,j,mu,multiplicity_cluster"]
    results = []
    for h in widths:
        pencil = thin2d.assemble_biharmonic(curve, thin2d.ThinFormSpec(h), basis)
        spec = thin2d.solve_thin2d(pencil, cfg.n_modes)
        rows = _spectrum_rows(spec)
        lines += [f"{h:.17g},{j},{v:.17g},{m}" for j, v, m in rows]
        results.append({"h": h, "eigenvalues": [r[1] for r in rows], "multiplicity": [r[2] for r in rows],
                        "rho_min": pencil.spec.rho_min})
    return {
        "csv": {"thin2d_spectrum.csv": "\n".join(lines) + "\n"},
        "json": {"thin2d_spectrum.json": {"curve": curve.name, "N": cfg.N, "p": cfg.p, "results": results}},
        "schema": "thin2d",
    }


def run_converge(cfg: RunConfig) -> dict:
    curve = curve_from_json(cfg.curve)
    table = thin2d.convergence_study(curve, cfg.h_grid, cfg.N, cfg.p, cfg.n_modes)
    out = {
        "csv": {"convergence.csv": table.to_csv()},
        "json": {"convergence.json": table.to_json()},
        "svg": {"convergence.svg": table.to_svg()},
        "schema": "converge",
    }
    if table.failures:
        h, msg = next(iter(sorted(table.failures.items())))
        out["error"] = {"module": "thin2d", "kind": "solve-failed", "message": f"h={h}: {msg}"}
    return out


def validation_checks() -> list[dict]:
    """Invariant suite on the built-in corpus; each entry records value, tolerance and verdict."""
    checks = []

    def add(name, value, tol, ok=None):
        ok = bool(value <= tol) if ok is None else bool(ok)
        checks.append({"name": name, "passed": ok, "value": float(value), "tolerance": float(tol)})

    xs = np.logspace(-2, math.log10(30.0), 64)
    worst = max(max(wronskian_residuals(bessel_quad(ell, x))) for ell in range(11) for x in xs)
    add("bessel-wronskians", worst, 1e-9)

    corpus = {
        "circle(1)": make_circle(1.0),
        "circle(2)": make_circle(2.0),
        "ellipse(2,1)": make_ellipse(2.0, 1.0),
        "fourier-curvature": make_fourier_curvature(2 * math.pi, [0.3, 0.1], [0.05]),
    }
    add("gauss-bonnet", max(gauss_bonnet_residual(c) for c in corpus.values()), 1e-10)

    circle, ellipse = corpus["circle(1)"], corpus["ellipse(2,1)"]
    pc = limit1d.assemble_limit_system(circle, 16)
    sc = limit1d.solve_limit_eigs(pc, 9)
    exact = np.array([limit1d.circle_closed_form(ell)[0] for ell in (0, 1, 1, 2, 2, 3, 3, 4, 4)])
    err = max(abs(sc.eigenvalues[:3]).max(), (abs(sc.eigenvalues[3:] - exact[3:]) / exact[3:]).max())
    add("limit-circle-closed-form", err, 1e-8)

    for name, curve, N in (("circle(1)", circle, 32), ("ellipse(2,1)", ellipse, 32)):
        p = limit1d.assemble_limit_system(curve, N)
        a = limit1d.solve_limit_eigs(p, 12, "schur").eigenvalues
        b = limit1d.solve_limit_eigs(p, 12, "block").eigenvalues
        n0 = int(np.count_nonzero(np.abs(a) <= 1e-6 * a[3]))
        add(f"limit-zero-modes {name}", abs(n0 - 3), 0)
        add(f"limit-schur-block {name}", float(np.max(np.abs(a[3:] - b[3:]) / a[3:])), 1e-8)

    basis = thin2d.TensorBasis(circle, 8, 8)
    pencil = thin2d.assemble_biharmonic(circle, thin2d.ThinFormSpec(0.1), basis)
    add("pencil-symmetric", 0.0 if pencil.is_symmetric() else 1.0, 0.0)
    try:
        np.linalg.cholesky(pencil.B)
        spd = 0.0
    except np.linalg.LinAlgError:
        spd = 1.0
    add("mass-spd", spd, 0.0)
    mu = thin2d.solve_thin2d(pencil, 12).eigenvalues
    add("thin2d-zero-modes circle(1)", float(np.max(mu[:3]) / mu[3]), 1e-6)

    ann = [e[0] for e in annulus.annulus_spectrum(0.1, 800.0, 6) if e[0] > 0]
    clusters = [m for m, _, _ in Spectrum(mu, np.eye(len(mu)), 1e-6).clusters() if m > 1e-6 * mu[3]]
    rel = max(abs(clusters[k] - ann[k]) / ann[k] for k in range(min(4, len(clusters))))
    add("thin2d-vs-annulus h=0.1", rel, 5e-3, ok=rel <= 5e-3 and len(clusters) >= 4)

    hs = [0.08, 0.04, 0.02]
    m2 = []
    for h in hs:
        lp = thin2d.assemble_laplacian(circle, thin2d.ThinFormSpec(h, "laplacian"), thin2d.TensorBasis(circle, 8, 4))
        m2.append(thin2d.solve_thin2d(lp, 3).eigenvalues[1])
    add("laplacian-extrapolated-limit", abs(richardson_limit(hs, m2) - 1.0), 1e-2)

    worst = 0.0
    fb = limit1d.FourierBasis(8, circle.length)
    for ell in (1, 2, 3):
        u = np.zeros(fb.dim)
        u[fb.index(ell)] = 1.0
        out = limit1d.restricted_bilap_apply(circle, u)
        worst = max(worst, abs(out[fb.index(ell)] - (ell**4 - 4 * ell**2)))
    add("restricted-bilaplacian-circle", worst, 1e-8)
    return checks


def run_validate(cfg: RunConfig) -> dict:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        checks = validation_checks()
    passed = all(c["passed"] for c in checks)
    lines = [f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']:.3e} (tol {c['tolerance']:.1e})"
             for c in checks]
    out = {
        "report": "\n".join(lines) + "\n",
        "json": {"validate.json": {"checks": checks, "passed": passed}},
        "schema": "validate",
    }
    if not passed:
        out["error"] = {"module": "cli", "kind": "validation-failed",
                        "message": ", ".join(c["name"] for c in checks if not c["passed"])}
    return out


# ---------------------------------------------------------------- output


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(result: dict, cfg: RunConfig, stdout) -> None:
    schema = OUTPUT_SCHEMAS[result["schema"]]
    texts: dict[str, list] = {}
    for fmt in FORMATS:
        for name, payload in result.get(fmt, {}).items():
            if fmt == "json":
                jsonschema.validate(payload, schema)
                payload = dump_json(payload)
            texts.setdefault(fmt, []).append((name, payload))
    if "report" in result:
        stdout.write(result["report"])
    if cfg.output is None:
        if "report" not in result:
            fmt = next((f for f in cfg.formats if f in texts), None)
            for _, text in texts.get(fmt, []):
                stdout.write(text)
        return
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    for fmt in cfg.formats:
        for name, text in texts.get(fmt, []):
            with open(out / name, "w", newline="\n", encoding="utf-8") as fh:
                fh.write(text)


def _fail(stream, status: int, module: str, kind: str, message: str) -> int:
    stream.write(json.dumps({"error": {"module": module, "kind": kind, "message": message}}, sort_keys=True) + "\n")
    return status


def main(argv: Optional[list] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args)
    except (ConfigError, InvalidArgumentError) as exc:
        return _fail(stderr, 2, "cli", "invalid-config", str(exc))
    bad = [f for f in cfg.formats if f not in FORMATS]
    if bad:
        return _fail(stderr, 2, "cli", "invalid-config", f"unknown formats {bad}")
    try:
        if cfg.command == "limit":
            result = run_limit(cfg)
        elif cfg.command == "annulus":
            result = run_annulus(cfg)
        elif cfg.command == "thin2d":
            result = run_thin2d(cfg, args.h_grid is not None or _config_has(args, "h_grid"))
        elif cfg.command == "converge":
            result = run_converge(cfg)
        else:
            result = run_validate(cfg)
    except InvalidArgumentError as exc:
        return _fail(stderr, 2, exc.module, exc.kind, str(exc))
    except ThinPlateError as exc:
        return _fail(stderr, 1, exc.module, exc.kind, str(exc))
    _emit(result, cfg, stdout)
    if "error" in result:
        e = result["error"]
        return _fail(stderr, 1, e["module"], e["kind"], e["message"])
    return 0


def _config_has(args, key: str) -> bool:
    if args.config is None:
        return False
    try:
        return key in json.loads(args.config.read_text())
    except (OSError, json.JSONDecodeError):
        return False


if __name__ == "__main__":
    sys.exit(main())
