"""Command-line entry point.

Every subcommand reads metric and map files (``builtin:NAME`` selects a
shipped definition) and prints one JSON or text document whose first part is
the run manifest: tool, version, subcommand, inputs and every numeric knob
with its effective value.

Exit codes: 0 PASS, 1 FAIL or INCONCLUSIVE, 2 usage or parse error,
3 numeric precondition violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .averaging import CONVERGENCE_TOL, MAX_DOUBLINGS, average_metric, default_resolution
from .catalog import builtin_map, builtin_metric
from .dsl import MapDef, MetricDef, load_map, load_metric
from .errors import DefinitionError, NumericPreconditionError
from .geodesics import COMPLETED, conservation_report, integrate_geodesic
from .geometry import (
    DEFAULT_MARGIN,
    fundamental_tensor,
    gamma_block_from,
    local_geometry,
    sasaki_from,
    signature,
    spray_vector_from,
)
from .identities import identity_suite, validate_metric
from .isometry import verify_all
from .report import FAIL_THRESHOLD, PASS, VerificationReport, jsonable
from .sampling import BundlePoint, SampleConfig

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
BUILTIN = "builtin:"


class UsageError(Exception):
    pass


def _metric(spec: str) -> MetricDef:
    if spec.startswith(BUILTIN):
        try:
            return builtin_metric(spec[len(BUILTIN):])
        except FileNotFoundError:
            raise UsageError(f"no built-in metric {spec[len(BUILTIN):]!r}") from None
    return load_metric(spec)


def _map(spec: str) -> MapDef:
    if spec.startswith(BUILTIN):
        try:
            return builtin_map(spec[len(BUILTIN):])
        except FileNotFoundError:
            raise UsageError(f"no built-in map {spec[len(BUILTIN):]!r}") from None
    return load_map(spec)


def _vector(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _dim_check(name, vec, n):
    if vec is not None and len(vec) != n:
        raise UsageError(f"--{name} has {len(vec)} entries, the metric has dimension {n}")


# --- manifest and output ---------------------------------------------------


def manifest(args, inputs: dict, parameters: dict) -> dict:
    return {"tool": "finslerkit", "version": __version__, "subcommand": args.command,
            "inputs": inputs, "parameters": parameters}


def _apply_overrides(report: VerificationReport, tol, fail_threshold):
    for c in report.checks:
        if tol is not None and c.tolerance > 0:
            c.tolerance = tol
        if fail_threshold is not None and c.fail_threshold not in (None, 0.0):
            c.fail_threshold = fail_threshold
    return {c.name: {"tolerance": c.tolerance, "fail_threshold": c.fail_threshold if c.fail_threshold is not None
                     else c.tolerance} for c in report.checks}


def _format_matrix(name, a) -> list[str]:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    lines = [f"{name}:"]
    lines += ["  " + "  ".join(f"{v + 0.0: .17g}" for v in row) for row in a]
    return lines


def emit(args, doc: dict, text_lines: list[str]) -> None:
    if args.format == "json":
        print(json.dumps(jsonable(doc), indent=2))
        return
    head = doc["manifest"]
    print(f"# {head['tool']} {head['version']} {head['subcommand']}")
    print(f"# inputs: {json.dumps(jsonable(head['inputs']))}")
    print(f"# parameters: {json.dumps(jsonable(head['parameters']))}")
    print("\n".join(text_lines))


def _report_command(args, report: VerificationReport, inputs: dict, parameters: dict) -> int:
    tolerances = _apply_overrides(report, args.tol, args.fail_threshold)
    parameters = {**parameters, "tol": args.tol, "fail_threshold": args.fail_threshold or FAIL_THRESHOLD,
                  "tolerances": tolerances}
    doc = {"manifest": manifest(args, inputs, parameters), "report": report.to_dict()}
    emit(args, doc, [report.to_text()])
    return EXIT_PASS if report.verdict == PASS else EXIT_FAIL


def _sample_config(args) -> SampleConfig:
    return SampleConfig(seed=args.seed, count=args.samples, margin=args.margin)


# --- subcommands -----------------------------------------------------------


def cmd_validate(args) -> int:
    m = _metric(args.metric)
    s = _sample_config(args)
    report = validate_metric(m, s)
    return _report_command(args, report, {"metric": args.metric}, s.as_dict())


def cmd_identities(args) -> int:
    m = _metric(args.metric)
    s = _sample_config(args)
    report = identity_suite(m, s, spray_fault=args.inject_spray_fault)
    params = {**s.as_dict(), "inject_spray_fault": args.inject_spray_fault}
    return _report_command(args, report, {"metric": args.metric}, params)


def cmd_verify(args) -> int:
    m, f = _metric(args.metric), _map(args.map)
    if m.n != f.n:
        raise UsageError(f"metric has dimension {m.n}, map has {f.n}")
    s = _sample_config(args)
    report = verify_all(m, f, s)
    return _report_command(args, report, {"metric": args.metric, "map": args.map}, s.as_dict())


def cmd_geodesic(args) -> int:
    m = _metric(args.metric)
    _dim_check("x0", args.x0, m.n)
    _dim_check("y0", args.y0, m.n)
    path = integrate_geodesic(m, BundlePoint(args.x0, args.y0), args.tmax, tol=args.tol,
                              samples=args.samples, margin=args.margin)
    csv_text = path.to_csv(m)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    drift = conservation_report(m, path)
    params = {"x0": args.x0, "y0": args.y0, "tmax": args.tmax, "tol": args.tol, "samples": args.samples,
              "margin": args.margin}
    summary = {
        "status": path.status,
        "samples": len(path.samples),
        "t_end": path.samples[-1][0] if path.samples else None,
        "x_end": path.samples[-1][1] if path.samples else None,
        "y_end": path.samples[-1][2] if path.samples else None,
        "F_drift": drift,
        "steps_accepted": path.steps_accepted,
        "steps_rejected": path.steps_rejected,
    }
    doc = {"manifest": manifest(args, {"metric": args.metric, "out": args.out}, params), "geodesic": summary}
    if not args.out:
        doc["csv"] = csv_text
    lines = [f"{k}: {jsonable(v)}" for k, v in summary.items()]
    if not args.out:
        lines.append(csv_text.rstrip("\n"))
    emit(args, doc, lines)
    return EXIT_PASS if path.status == COMPLETED else EXIT_FAIL


def cmd_average(args) -> int:
    m = _metric(args.metric)
    _dim_check("x", args.x, m.n)
    resolution = args.resolution or default_resolution(m.n)
    avg = average_metric(m, args.x, resolution, tol=args.convergence_tol, max_doublings=args.max_doublings)
    params = {"x": args.x, "resolution": resolution, "convergence_tol": args.convergence_tol,
              "max_doublings": args.max_doublings}
    doc = {"manifest": manifest(args, {"metric": args.metric}, params),
           "h": avg.h, "eigenvalues": avg.eigenvalues, "final_resolution": avg.resolution, "trace": avg.trace}
    lines = _format_matrix("h", avg.h) + ["trace:"]
    lines += [f"  resolution={t['resolution']}  max_entry_change={t['max_entry_change']}" for t in avg.trace]
    emit(args, doc, lines)
    return EXIT_PASS


def _point_command(args, build) -> int:
    m = _metric(args.metric)
    _dim_check("x", args.x, m.n)
    _dim_check("y", args.y, m.n)
    p = BundlePoint(args.x, args.y)
    fields = build(m, p)
    params = {"x": args.x, "y": args.y, "margin": args.margin}
    doc = {"manifest": manifest(args, {"metric": args.metric}, params), **fields}
    lines = []
    for key, value in fields.items():
        if isinstance(value, np.ndarray) and value.ndim:
            lines += _format_matrix(key, value)
        else:
            lines.append(f"{key}: {jsonable(value)}")
    emit(args, doc, lines)
    return EXIT_PASS


def cmd_sasaki(args) -> int:
    def build(m, p):
        sas = sasaki_from(local_geometry(m, p, margin=args.margin))
        neg, zero, pos = signature(sas.GF)
        return {"GF": sas.GF, "index": sas.index, "signature": {"negative": neg, "zero": zero, "positive": pos}}
    return _point_command(args, build)


def cmd_tensor(args) -> int:
    def build(m, p):
        t = fundamental_tensor(m, p, margin=args.margin)
        return {"F": m.value(p.x, p.y), "g": t.g, "index": t.index_k, "det": t.det}
    return _point_command(args, build)


def cmd_spray(args) -> int:
    def build(m, p):
        geo = local_geometry(m, p, margin=args.margin)
        return {"G": geo.G, "S": spray_vector_from(geo)}
    return _point_command(args, build)


def cmd_connection(args) -> int:
    def build(m, p):
        geo = local_geometry(m, p, margin=args.margin)
        return {"N": geo.N, "Gamma": gamma_block_from(geo).matrix}
    return _point_command(args, build)


# --- parser ----------------------------------------------------------------


def _common(p, *, sampling: bool = False, report: bool = False):
    p.add_argument("--format", choices=("json", "text"), default="json", help="output format (default json)")
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN, help="cone margin")
    if sampling:
        p.add_argument("--samples", type=int, default=100, help="number of sampled bundle points")
        p.add_argument("--seed", type=int, default=0, help="sampling seed")
    if report:
        p.add_argument("--tol", type=float, default=None,
                       help="override every continuous check tolerance (default: per-check module values)")
        p.add_argument("--fail-threshold", type=float, default=None,
                       help=f"residual above which a check FAILs (default {FAIL_THRESHOLD:g})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finslerkit",
        description="Sampled verification of pseudo-Finsler geometry: sprays, connections, Sasaki lifts, isometries.",
        epilog="Metric and map arguments are file paths or builtin:NAME. Vectors are comma-separated; "
               "write negative leading entries as --x=-1,0.",
    )
    parser.add_argument("--version", action="version", version=f"finslerkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("validate", help="check homogeneity, positivity, nondegeneracy and index constancy")
    p.add_argument("metric")
    _common(p, sampling=True, report=True)
    p.set_defaults(func=cmd_validate, samples=50)

    p = sub.add_parser("identities", help="run the spray, connection and Sasaki identity suite")
    p.add_argument("metric")
    _common(p, sampling=True, report=True)
    p.add_argument("--inject-spray-fault", type=float, default=0.0, metavar="DELTA",
                   help="debug: add DELTA to G^1 to show that the suite catches a wrong spray")
    p.set_defaults(func=cmd_identities)

    p = sub.add_parser("verify", help="check whether a map is an isometry (Finsler, J, spray, Sasaki)")
    p.add_argument("metric")
    p.add_argument("map")
    _common(p, sampling=True, report=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("geodesic", help="integrate a geodesic and report F conservation")
    p.add_argument("metric")
    p.add_argument("--x0", type=_vector, required=True)
    p.add_argument("--y0", type=_vector, required=True)
    p.add_argument("--tmax", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-9, help="local error tolerance per step")
    p.add_argument("--samples", type=int, default=101, help="number of equispaced output times")
    p.add_argument("--out", help="CSV output path (default: CSV embedded in the document)")
    _common(p)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("average", help="averaged Riemannian metric h at a point")
    p.add_argument("metric")
    p.add_argument("--x", type=_vector, required=True)
    p.add_argument("--resolution", type=int, default=None, help="starting node count (default 32 for n=2, 16 for n=3)")
    p.add_argument("--convergence-tol", type=float, default=CONVERGENCE_TOL)
    p.add_argument("--max-doublings", type=int, default=MAX_DOUBLINGS)
    _common(p)
    p.set_defaults(func=cmd_average)

    for name, func, text in (
        ("sasaki", cmd_sasaki, "Sasaki matrix and its signature at a bundle point"),
        ("tensor", cmd_tensor, "fundamental tensor and index at a bundle point"),
        ("spray", cmd_spray, "spray coefficients and spray vector at a bundle point"),
        ("connection", cmd_connection, "nonlinear connection N and Gamma at a bundle point"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("metric")
        p.add_argument("--x", type=_vector, required=True)
        p.add_argument("--y", type=_vector, required=True)
        _common(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DefinitionError, ValueError, OSError) as exc:
        print(f"finslerkit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericPreconditionError as exc:
        print(f"finslerkit {args.command}: numeric precondition violated: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
