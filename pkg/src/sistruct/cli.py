"""Command line interface: analyze | verify | show | list-builtin.

Exit codes: 0 all checks passed, 1 at least one check failed, 2 input or
usage error.  ``--json`` emits a machine-readable report with a stable key
order and reals rendered with 17 significant digits, so identical inputs
produce byte-identical output.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import geometry, structure, verify
from .structure import (
    ClassificationError,
    DegeneratePointError,
    SamplingError,
    classify_degeneracy,
    connection_orientation,
    sample_points,
    structure_jet,
)
from .systems import SystemFileError, list_builtins, load_system
from .tensor import SingularMetricError

__all__ = ["main", "serialize_report", "parse_report"]


# --- JSON emission -----------------------------------------------------------


def _fmt_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        # reports must stay strict JSON; clamp non-finite diagnostics
        x = float(np.clip(x, -1.7e308, 1.7e308)) if x == x else 0.0
    return format(x, ".17g")


def _emit(obj) -> str:
    if isinstance(obj, dict):
        items = ", ".join(f"{_emit(str(k))}: {_emit(v)}" for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_emit(v) for v in obj) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"')
        out = out.replace("\n", "\\n").replace("\t", "\\t")
        return f'"{out}"'
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def report_document(report: verify.SuiteReport) -> dict:
    """The report as a plain dict with the documented key order."""
    classification: dict | None = None
    if report.classification is not None:
        classification = {
            "class": report.classification.kind,
            "per_point_ranks": list(report.classification.per_point_ranks),
        }
    checks = [
        {
            "name": c.name,
            "paper_ref": c.provenance,
            "max_abs_residual": c.max_abs_residual,
            "scale": c.scale,
            "rel_residual": c.rel_residual,
            "tolerance": c.tolerance,
            "pass": c.passed,
        }
        for c in report.checks
    ]
    doc = {
        "system": report.system,
        "mode": report.mode,
        "seed": report.seed,
        "points": report.npoints,
        "sign_convention": report.sign_convention,
        "classification": classification,
        "checks": checks,
        "summary": {
            "passed": report.passed,
            "failed": report.failed,
            "total": len(report.checks),
        },
    }
    if report.properness is not None:
        doc["properness"] = {
            "verdict": report.properness.verdict,
            "max_abs_residual": report.properness.max_abs_residual,
            "scale": report.properness.scale,
            "rel_residual": report.properness.rel_residual,
            "tolerance": report.properness.tolerance,
        }
    if report.variants:
        doc["variants"] = [
            {
                "name": c.name,
                "paper_ref": c.provenance,
                "max_abs_residual": c.max_abs_residual,
                "scale": c.scale,
                "rel_residual": c.rel_residual,
                "tolerance": c.tolerance,
                "pass": c.passed,
            }
            for c in report.variants
        ]
    doc["condition"] = dict(report.condition_stats)
    return doc


def serialize_report(report: verify.SuiteReport) -> str:
    return _emit(report_document(report)) + "\n"


def parse_report(text: str) -> dict:
    import json

    return json.loads(text)


# --- human-readable output ---------------------------------------------------


def _print_table(report: verify.SuiteReport) -> None:
    print(f"system: {report.system}   mode: {report.mode}   seed: {report.seed}   "
          f"points: {report.npoints}")
    print(f"convention: {report.sign_convention}")
    if report.classification is not None:
        ranks = report.classification.per_point_ranks
        print(f"classification: {report.classification.kind} "
              f"(ranks {min(ranks)}..{max(ranks)} over {len(ranks)} points)")
    if report.properness is not None:
        print(f"properness: {report.properness.verdict} "
              f"(scaled secondary magnitude {report.properness.rel_residual:.3e}, "
              f"tolerance {report.properness.tolerance:.1e})")
    header = f"{'check':34} {'max|res|':>12} {'scale':>12} {'rel':>12} {'tol':>9} verdict"
    print(header)
    print("-" * len(header))
    for c in report.checks:
        verdict = "PASS" if c.passed else "FAIL"
        print(f"{c.name:34} {c.max_abs_residual:12.3e} {c.scale:12.3e} "
              f"{c.rel_residual:12.3e} {c.tolerance:9.1e} {verdict}")
    for c in report.variants:
        note = "expected-fail" if not c.passed else "unexpectedly-passes"
        print(f"{c.name:34} {c.max_abs_residual:12.3e} {c.scale:12.3e} "
              f"{c.rel_residual:12.3e} {c.tolerance:9.1e} {note} (variant)")
    print(f"summary: {report.passed} passed, {report.failed} failed, "
          f"{len(report.checks)} total")


def _print_matrix(label: str, arr: np.ndarray, coords) -> None:
    print(f"{label}:")
    width = max(len(c) for c in coords) + 1
    print(" " * (width + 1) + "  ".join(f"{c:>14}" for c in coords))
    for i, row in enumerate(arr):
        cells = "  ".join(f"{v:14.8g}" for v in row)
        print(f" {coords[i]:>{width}} {cells}")


# --- tolerance overrides -----------------------------------------------------


def _parse_tols(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise SystemFileError(
                f"--tol expects NAME=VALUE, got {item!r}"
            )
        name, _, value = item.partition("=")
        try:
            out[name.strip()] = float(value)
        except ValueError as err:
            raise SystemFileError(
                f"--tol {name.strip()!r}: {value!r} is not a number"
            ) from err
    return out


# --- commands ----------------------------------------------------------------


def cmd_verify(args) -> int:
    system = load_system(args.system)
    report = verify.run_suite(
        system, npoints=args.points, seed=args.seed,
        tol_overrides=_parse_tols(args.tol),
    )
    if args.json:
        sys.stdout.write(serialize_report(report))
    else:
        _print_table(report)
    return 0 if report.all_passed else 1


def cmd_analyze(args) -> int:
    system = load_system(args.system)
    system.validate_shape()
    if not system.basis:
        raise SystemFileError(
            f"system {system.name!r} declares no potential basis; "
            "only 'verify' smoke checks apply"
        )
    points = sample_points(system, args.points, args.seed)
    classification = classify_degeneracy(system, points)
    payload = {
        "system": system.name,
        "seed": args.seed,
        "points": args.points,
        "classification": {
            "class": classification.kind,
            "per_point_ranks": list(classification.per_point_ranks),
            "votes": {str(r): c for r, c in classification.votes.items()},
        },
    }
    mode = None
    if classification.kind in ("NonDegenerate", "SemiDegenerate"):
        mode = classification.mode
        residuals, conditions, sec_max, prim_max = [], [], 0.0, 0.0
        for x in points:
            sol = structure.solve_structure_point(system, x, mode)
            residuals.append(sol.residual)
            conditions.append(sol.condition)
            sec_max = max(sec_max, float(np.abs(sol.secondary).max()))
            prim_max = max(prim_max, float(np.abs(sol.primary).max()))
        rel = sec_max / (1.0 + prim_max)
        tol = verify.DEFAULT_TOLERANCES["properness"]
        tol = float(system.tolerances.get("properness", tol))
        payload["properness"] = {
            "verdict": "proper" if rel <= tol else "conformal",
            "rel_residual": rel,
            "tolerance": tol,
        }
        payload["solve"] = {
            "residual_max": max(residuals),
            "condition_max": max(conditions),
            "condition_mean": sum(conditions) / len(conditions),
        }
        if classification.kind == "SemiDegenerate":
            payload["semi_degeneracy"] = {
                "alpha": classification.alpha,
                "s": list(classification.s),
                "at_point": list(points[0]),
            }
    if args.json:
        sys.stdout.write(_emit(payload) + "\n")
        return 0
    print(f"system: {system.name}")
    vote_str = ", ".join(f"rank {r}: {c}" for r, c in classification.votes.items())
    print(f"classification: {classification.kind} ({vote_str})")
    if "semi_degeneracy" in payload:
        sd = payload["semi_degeneracy"]
        s_str = ", ".join(f"{v:.8g}" for v in sd["s"])
        pt_str = ", ".join(f"{v:.6g}" for v in sd["at_point"])
        print(f"laplacian relation at ({pt_str}): alpha = {sd['alpha']:.8g}, "
              f"s = ({s_str})")
    if "properness" in payload:
        pr = payload["properness"]
        print(f"properness: {pr['verdict']} (scaled secondary magnitude "
              f"{pr['rel_residual']:.3e}, tolerance {pr['tolerance']:.1e})")
        sv = payload["solve"]
        print(f"solve: residual max {sv['residual_max']:.3e}, condition max "
              f"{sv['condition_max']:.3e}, condition mean {sv['condition_mean']:.3e}")
    return 0


def cmd_show(args) -> int:
    system = load_system(args.system)
    system.validate_shape()
    try:
        point = np.array([float(v) for v in args.point.split(",")])
    except ValueError as err:
        raise SystemFileError(f"--point: {err}") from err
    if point.shape[0] != system.n:
        raise SystemFileError(
            f"--point needs {system.n} comma-separated values, got {point.shape[0]}"
        )
    for name, v, (lo, hi) in zip(system.coords, point, system.domain):
        if not lo <= v <= hi:
            raise SystemFileError(
                f"--point: coordinate {name} = {v} outside domain [{lo}, {hi}]"
            )
    if structure._rejected(system, point):
        raise SystemFileError(
            f"--point {tuple(point)} rejected by an excluded expression"
        )
    coords = list(system.coords)
    m = geometry.metric_at(system, point)
    lc = geometry.christoffel(m)
    print(f"system {system.name} at point "
          + ", ".join(f"{c} = {v:g}" for c, v in zip(coords, point)))
    _print_matrix("g", m.g, coords)
    _print_gamma(lc.gamma, coords, "Gamma (Levi-Civita)")
    if not system.basis:
        bundle = geometry.contractions(geometry.curvature(lc), m)
        _print_matrix("Ric (Levi-Civita)", bundle.Ric.components, coords)
        print(f"Scal: {bundle.Scal:.10g}")
        return 0
    points = sample_points(system, max(structure.MIN_CLASSIFY_POINTS, 8), args.seed)
    classification = classify_degeneracy(system, points)
    mode = classification.mode
    sol = structure_jet(system, point, mode)
    conn = geometry.induced_connection(
        lc, sol.primary, sol.dprimary, connection_orientation(mode)
    )
    bundle = geometry.contractions(geometry.curvature(conn), m)
    label = "T" if mode == structure.NONDEG else "D"
    sec = "tau" if mode == structure.NONDEG else "eta"
    print(f"classification: {classification.kind}")
    for k in range(system.n):
        _print_matrix(f"{label}[.,.,{coords[k]}] (upper index {coords[k]})",
                      sol.primary[:, :, k], coords)
    _print_matrix(sec, sol.secondary, coords)
    _print_matrix("Ric", bundle.Ric.components, coords)
    print(f"Scal: {bundle.Scal:.10g}")
    _print_matrix("B", bundle.B.components, coords)
    proj = bundle.Proj.components
    print(f"Proj: max |component| = {np.abs(proj).max():.6e}")
    return 0


def _print_gamma(gamma: np.ndarray, coords, label: str) -> None:
    if np.abs(gamma).max() == 0.0:
        print(f"{label}: 0")
        return
    print(f"{label}: nonzero components")
    n = len(coords)
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                if gamma[k, i, j] != 0.0:
                    print(f"  Gamma^{coords[k]}_({coords[i]},{coords[j]}) = "
                          f"{gamma[k, i, j]:.10g}")


def cmd_list_builtin(args) -> int:
    for name, desc in list_builtins():
        print(f"{name:12} {desc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sistruct",
        description="Extract structure tensors of second-order superintegrable "
                    "systems and verify the curvature identities of their "
                    "induced connections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("system", help="builtin name (see list-builtin) or path "
                                       "to a system TOML file")
    common.add_argument("--points", type=int, default=20,
                        help="number of sample points (default 20, minimum 8)")
    common.add_argument("--seed", type=int, default=42,
                        help="sampling seed (default 42)")
    common.add_argument("--json", action="store_true",
                        help="emit a machine-readable JSON report")

    p_verify = sub.add_parser("verify", parents=[common],
                              help="run the full identity suite")
    p_verify.add_argument("--tol", action="append", metavar="NAME=VALUE",
                          help="override a check tolerance (repeatable)")
    p_verify.set_defaults(func=cmd_verify)

    p_analyze = sub.add_parser("analyze", parents=[common],
                               help="classification and properness only")
    p_analyze.set_defaults(func=cmd_analyze)

    p_show = sub.add_parser("show", help="print tensors at one point")
    p_show.add_argument("system")
    p_show.add_argument("--point", required=True,
                        help="comma-separated coordinates, e.g. 1,1,1")
    p_show.add_argument("--seed", type=int, default=42)
    p_show.set_defaults(func=cmd_show)

    p_list = sub.add_parser("list-builtin", help="list builtin systems")
    p_list.set_defaults(func=cmd_list_builtin)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse exits 2 on usage errors and 0 on --help
        return int(err.code or 0)
    try:
        if getattr(args, "points", 20) < structure.MIN_CLASSIFY_POINTS and getattr(
            args, "command", ""
        ) in ("verify", "analyze"):
            print(
                f"error: --points must be at least {structure.MIN_CLASSIFY_POINTS}",
                file=sys.stderr,
            )
            return 2
        return args.func(args)
    except (
        SystemFileError,
        ClassificationError,
        SamplingError,
        DegeneratePointError,
        SingularMetricError,
        ValueError,
    ) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
