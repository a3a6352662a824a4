"""Command-line interface.

Exit codes: 0 success, 1 domain failure (the input is well formed but the
mathematics says no), 2 usage, input or I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dga
from .branches import analyze, branch_slopes, classify
from .connection import pushforward_connection
from .curves import builtin_family, characteristic_polynomials
from .errors import AzumayaError, DomainError, InputError
from .fixtures import FIXTURES, fixture_names, load_fixture
from .forms import DEFAULT_FORM_TOL, check_lagrangian, check_relative_dim0, check_slag, coordinate_form
from .io import (
    MapSpecDoc,
    branch_csv,
    branch_svg,
    curve_map_document,
    dumps,
    matrix_to_json,
    parse_spec,
    serialize,
)
from .jets import FnSpec
from .linalg import DEFAULT_TOL
from .point import evaluate, pushforward_module, support, validate

TOL_ENV = "AZUMAYA_TOL"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would call sys.exit
        raise UsageError(message)


def _default_tol() -> float | None:
    raw = os.environ.get(TOL_ENV)
    if raw is None:
        return None
    try:
        value = float(raw)
    except ValueError:
        raise UsageError(f"{TOL_ENV}={raw!r} is not a number") from None
    if not value > 0:
        raise UsageError(f"{TOL_ENV} must be positive")
    return value


def _load(source: str, tol: float | None) -> MapSpecDoc:
    path = Path(source)
    if source in FIXTURES and not path.exists():
        doc = load_fixture(source)
    else:
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise UsageError(f"cannot read {source!r}: {exc.strerror or exc}; "
                             f"built-in fixtures: {', '.join(fixture_names())}") from None
        doc = parse_spec(data)
    if tol is not None:
        doc.options["tol"] = tol
    return doc


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _emit(report: dict) -> None:
    sys.stdout.write(dumps(report) + "\n")


def _curve(doc: MapSpecDoc, args):
    return doc.curve_map(getattr(args, "t", None))


def _grid(doc: MapSpecDoc, args) -> int:
    return args.grid if args.grid is not None else int(doc.options.get("grid_size", 512))


# -- commands ---------------------------------------------------------------


def cmd_validate(args) -> int:
    doc = _load(args.source, args.tol)
    if doc.kind == "point_map":
        report = validate(doc.point_map()).to_json()
        _emit(report)
        return 0 if report["admissible"] else 1
    cmap = _curve(doc, args)
    try:
        diag = analyze(cmap, _grid(doc, args), workers=args.workers)
    except DomainError as exc:
        _emit({"admissible": False, "reason": getattr(exc, "reason", type(exc).__name__),
               "x": getattr(exc, "x", None), "message": str(exc)})
        return 1
    _emit({"admissible": True, "reason": None, "fibers": len(diag.grid), "warnings": diag.warnings})
    return 0


def cmd_support(args) -> int:
    doc = _load(args.source, args.tol)
    _emit(support(doc.point_map()).to_json())
    return 0


def cmd_eval(args) -> int:
    doc = _load(args.source, args.tol)
    amap = doc.point_map()
    try:
        f = FnSpec.parse(args.f, amap.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit({"f": args.f, "matrix": matrix_to_json(evaluate(amap, f))})
    return 0


def cmd_pushforward(args) -> int:
    doc = _load(args.source, args.tol)
    _emit(pushforward_module(doc.point_map()).to_json())
    return 0


def cmd_dga_check(args) -> int:
    import itertools

    r = args.r
    results = {}
    results["ad_rank"] = dga.derivation_space_dimension(r)
    results["ad_rank_ok"] = results["ad_rank"] == r * r - 1
    basis = dga.sl_basis(r)
    d2_ok = True
    for deg in range(0, min(args.max_degree, 2) + 1):
        for gens in itertools.islice(itertools.combinations(basis, deg + 1), 12):
            w = dga.DGAElement(r, deg, [(gens[0], tuple(gens[1:]))])
            d2_ok &= dga.dga_d(dga.dga_d(w)).is_zero_on_probes()
    results["d_squared_zero"] = d2_ok
    a = dga.DGAElement(r, 1, [(basis[0], (basis[1],))])
    b = dga.DGAElement(r, 1, [(basis[-1], (basis[2 % len(basis)],))])
    lhs = dga.dga_d(dga.dga_wedge(a, b))
    rhs = dga.dga_wedge(dga.dga_d(a), b) - dga.dga_wedge(a, dga.dga_d(b))
    results["graded_leibniz"] = dga.dga_equal(lhs, rhs)
    ok = results["ad_rank_ok"] and d2_ok and results["graded_leibniz"]
    results["pass"] = ok
    _emit(results)
    return 0 if ok else 1


def cmd_curve_analyze(args) -> int:
    doc = _load(args.source, args.tol)
    diag = analyze(_curve(doc, args), _grid(doc, args), workers=args.workers, strict=args.strict)
    if args.format == "csv":
        _write(branch_csv(diag), args.out)
    elif args.format == "svg":
        _write(branch_svg(diag), args.out)
    else:
        _write(dumps(diag.to_json()), args.out)
    return 0


def cmd_curve_classify(args) -> int:
    doc = _load(args.source, args.tol)
    diag = analyze(_curve(doc, args), _grid(doc, args), workers=args.workers)
    report = classify(diag).to_json()
    report["events"] = [e.to_json() for e in diag.events]
    report["warnings"] = diag.warnings
    _emit(report)
    return 0


def cmd_connection(args) -> int:
    doc = _load(args.source, args.tol)
    cmap = _curve(doc, args)
    diag = analyze(cmap, _grid(doc, args), workers=args.workers)
    conn = pushforward_connection(cmap, diag)
    out = conn.to_json()
    if not args.full:
        for s in out["simple"]:
            coef = np.array([complex(*c) for c in s.pop("coefficient")])
            s.pop("x")
            finite = coef[np.isfinite(coef)]
            s["max_abs_coefficient"] = float(np.max(np.abs(finite))) if finite.size else None
        for f in out["filtered"]:
            f.pop("x")
    _emit(out)
    return 0


def cmd_adapted_check(args) -> int:
    doc = _load(args.source, args.tol)
    cmap = _curve(doc, args)
    diag = analyze(cmap, _grid(doc, args), workers=args.workers)
    tol = args.form_tol
    convention = args.slag_convention or doc.options.get("slag_convention", "im")
    if args.check == "relative-dim0":
        report = check_relative_dim0(diag, tol)
    elif args.check == "lagrangian":
        if diag.n < 2:
            raise UsageError("lagrangian check needs at least two target coordinates")
        report = check_lagrangian(diag, coordinate_form(diag.n, 0, 1), 1, diag.n, tol)
    else:
        report = check_slag(diag, convention, tol)
    out = report.to_json()
    out["check"] = args.check
    if args.check == "slag":
        out["convention"] = convention
        out["slopes"] = branch_slopes(diag)
    _emit(out)
    return 0 if report.passed else 1


def cmd_family_eval(args) -> int:
    name = args.name[len("example-"):] if args.name.startswith("example-") else args.name
    try:
        spec = builtin_family(name)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    from .curves import evaluate_family

    cmap = evaluate_family(spec, args.t if args.t is not None else None, args.tol or DEFAULT_TOL)
    doc = curve_map_document(cmap)
    text = serialize(doc).decode("utf-8")
    if args.charpoly:
        import json

        obj = json.loads(text)
        obj["characteristic_polynomials"] = [str(p.as_expr()) for p in characteristic_polynomials(cmap)]
        text = json.dumps(obj, indent=2, sort_keys=True)
    _write(text, args.out)
    return 0


def cmd_plot(args) -> int:
    doc = _load(args.source, args.tol)
    diag = analyze(_curve(doc, args), _grid(doc, args), workers=args.workers)
    _write(branch_svg(diag), args.out)
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="azumaya", description="Maps from Azumaya points and curves to R^n.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_text, source=True, curve=False):
        p = sub.add_parser(name, help=help_text)
        if source:
            p.add_argument("source", help="JSON document path or built-in fixture name")
        p.add_argument("--tol", type=float, default=None, help=f"tolerance (default ${TOL_ENV} or {DEFAULT_TOL})")
        if curve:
            p.add_argument("--grid", type=int, default=None, help="number of fibers (default 512)")
            p.add_argument("--workers", type=int, default=1, help="threads for fiber analysis")
            p.add_argument("--t", type=float, default=None, help="family parameter")
        p.set_defaults(func=func)
        return p

    p = add("validate", cmd_validate, "admissibility report", curve=True)
    add("support", cmd_support, "support scheme of a point map")
    p = add("eval", cmd_eval, "evaluate phi#(f) on a point map")
    p.add_argument("--f", required=True, help="expression in y1..yn, e.g. 'y1**2 + sin(y2)'")
    add("pushforward", cmd_pushforward, "push-forward module of a point map")
    p = add("dga-check", cmd_dga_check, "exact checks of the matrix differential calculus", source=False)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--max-degree", type=int, default=2)
    p = add("curve-analyze", cmd_curve_analyze, "branch diagram of a curve map", curve=True)
    p.add_argument("--format", choices=("json", "csv", "svg"), default="json")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--strict", action="store_true", help="fail on ambiguous track assignments")
    add("curve-classify", cmd_curve_classify, "classify a branch diagram", curve=True)
    p = add("connection", cmd_connection, "push-forward of the trivial connection", curve=True)
    p.add_argument("--full", action="store_true", help="include sampled coefficients")
    p = add("adapted-check", cmd_adapted_check, "Lagrangian-type conditions on the branches", curve=True)
    p.add_argument("--check", choices=("slag", "lagrangian", "relative-dim0"), default="slag")
    p.add_argument("--slag-convention", choices=("im", "re"), default=None)
    p.add_argument("--form-tol", type=float, default=DEFAULT_FORM_TOL)
    p = add("family-eval", cmd_family_eval, "slice of a built-in family", source=False)
    p.add_argument("name", help="family name, e.g. 7.2.2-phi4")
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--charpoly", action="store_true", help="append characteristic polynomials")
    p = add("plot", cmd_plot, "SVG branch plot", curve=True)
    p.add_argument("--out", required=True)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """Run one command and return its exit code; never raises."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(sys.argv[1:] if argv is None else argv))
        if args.command is None:
            raise UsageError("a command is required")
        if args.tol is None:
            args.tol = _default_tol()
        elif not args.tol > 0:
            raise UsageError("--tol must be positive")
        if getattr(args, "grid", None) is not None and args.grid < 2:
            raise UsageError("--grid must be at least 2")
        if getattr(args, "workers", 1) < 1:
            raise UsageError("--workers must be at least 1")
        return args.func(args)
    except DomainError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1
    except (InputError, UsageError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except AzumayaError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 2
    except (ValueError, TypeError, KeyError) as exc:
        sys.stderr.write(f"error: invalid input: {exc}\n")
        return 2
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 2


def main() -> None:
    sys.exit(run())
