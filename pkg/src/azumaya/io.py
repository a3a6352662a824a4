"""JSON documents, serialization, and CSV/SVG output of branch diagrams.

A map document looks like::

    {"version": "1.0",
     "point_map": {"r": 2, "n": 1, "k": "inf", "matrices": [[[1, 0], [[0, 1], 1]]]},
     "options": {"tol": 1e-8}}

or carries a ``curve_map`` with a base, polynomial or expression entries in
``x`` and optionally a one-parameter ``family`` in ``t``.  Matrix entries are
numbers, ``[re, im]`` pairs or rational strings such as ``"1/3"``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np
import sympy

from .curves import Base, FamilySpec, MatrixCurveMap, T, X, evaluate_family, parse_expression
from .errors import ParseError, SchemaError, VersionUnsupported
from .jets import FnSpec
from .linalg import DEFAULT_TOL
from .point import C_INFINITY, AzumayaPointMap

SUPPORTED_VERSIONS = ("1.0",)
SLAG_CONVENTIONS = ("im", "re")


@dataclass
class MapSpecDoc:
    version: str
    kind: str  # "point_map" or "curve_map"
    r: int
    n: int
    k: float
    matrices: list | None = None  # point map: n nested r x r lists of int/Fraction/float/complex
    base: Base | None = None
    entries: list[sympy.Matrix] | None = None  # curve map, may involve t when family is set
    family: dict | None = None  # {"name", "lo", "hi", "default"}
    options: dict = field(default_factory=dict)

    @property
    def tol(self) -> float:
        return float(self.options.get("tol", DEFAULT_TOL))

    def point_map(self) -> AzumayaPointMap:
        if self.kind != "point_map":
            raise SchemaError("/point_map", "document does not contain a point map")
        return AzumayaPointMap.from_matrices(self.matrices, k=self.k, tol=self.tol)

    def family_spec(self) -> FamilySpec | None:
        if self.kind != "curve_map" or self.family is None:
            return None
        fam = self.family
        return FamilySpec(fam.get("name", ""), self.base, tuple(self.entries), float(fam["lo"]), float(fam["hi"]),
                          float(fam["default"]))

    def curve_map(self, t=None) -> MatrixCurveMap:
        if self.kind != "curve_map":
            raise SchemaError("/curve_map", "document does not contain a curve map")
        spec = self.family_spec()
        if spec is not None:
            cmap = evaluate_family(spec, t, self.tol)
            return MatrixCurveMap(cmap.base, cmap.ms, self.k, self.tol, cmap.variable, cmap.name)
        return MatrixCurveMap(self.base, tuple(self.entries), self.k, self.tol, X)


# ---------------------------------------------------------------------------
# Parsing


def _fail(path: str, message: str):
    raise SchemaError(path, message)


def _number(value, path: str):
    if isinstance(value, bool):
        _fail(path, "expected a number, got a boolean")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            _fail(path, "numbers must be finite")
        return value
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError):
            _fail(path, f"cannot read {value!r} as a rational number")
    _fail(path, f"expected a number, got {type(value).__name__}")


def _entry(value, path: str):
    if isinstance(value, list):
        if len(value) != 2:
            _fail(path, "complex entries are [re, im] pairs")
        re = _number(value[0], path + "/0")
        im = _number(value[1], path + "/1")
        if im == 0:
            return re
        return complex(float(re), float(im))
    return _number(value, path)


def _object(value, path: str) -> dict:
    if not isinstance(value, dict):
        _fail(path, "expected an object")
    return value


def _int(value, path: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, "expected an integer")
    if value < minimum:
        _fail(path, f"must be at least {minimum}")
    return value


def _k(value, path: str) -> float:
    if value is None or value == "inf":
        return C_INFINITY
    return _int(value, path)


def _options(raw, path: str) -> dict:
    if raw is None:
        return {}
    raw = _object(raw, path)
    out = {}
    for key, value in raw.items():
        p = f"{path}/{key}"
        if key == "tol":
            v = _number(value, p)
            if not float(v) > 0:
                _fail(p, "tol must be positive")
            out[key] = float(v)
        elif key == "grid_size":
            out[key] = _int(value, p, 2)
        elif key == "slag_convention":
            if value not in SLAG_CONVENTIONS:
                _fail(p, f"must be one of {list(SLAG_CONVENTIONS)}")
            out[key] = value
        else:
            _fail(p, "unknown option")
    return out


def _point_map(raw, path: str, doc: dict) -> dict:
    raw = _object(raw, path)
    for key in raw:
        if key not in ("r", "n", "k", "matrices"):
            _fail(f"{path}/{key}", "unknown field")
    if "matrices" not in raw:
        _fail(f"{path}/matrices", "required")
    mats_raw = raw["matrices"]
    if not isinstance(mats_raw, list) or not mats_raw:
        _fail(f"{path}/matrices", "expected a nonempty list of matrices")
    n = _int(raw.get("n", len(mats_raw)), f"{path}/n", 1)
    if n != len(mats_raw):
        _fail(f"{path}/n", f"n={n} but {len(mats_raw)} matrices given")
    first = mats_raw[0]
    r = _int(raw.get("r", len(first) if isinstance(first, list) else 0), f"{path}/r", 1)
    matrices = []
    for i, m in enumerate(mats_raw):
        mp = f"{path}/matrices/{i}"
        if not isinstance(m, list) or len(m) != r or any(not isinstance(row, list) or len(row) != r for row in m):
            _fail(mp, f"expected a square {r}x{r} matrix")
        matrices.append([[_entry(e, f"{mp}/{a}/{b}") for b, e in enumerate(row)] for a, row in enumerate(m)])
    doc.update(kind="point_map", r=r, n=n, k=_k(raw.get("k"), f"{path}/k"), matrices=matrices)
    return doc


def _base(raw, path: str) -> Base:
    raw = _object(raw, path)
    kind = raw.get("kind", "interval")
    if kind == "circle":
        return Base.circle()
    if kind != "interval":
        _fail(f"{path}/kind", "must be 'interval' or 'circle'")
    lo = float(_number(raw.get("lo"), f"{path}/lo"))
    hi = float(_number(raw.get("hi"), f"{path}/hi"))
    if not hi > lo:
        _fail(path, "interval needs hi > lo")
    return Base.interval(lo, hi)


def _curve_entry(value, path: str, symbols: dict) -> sympy.Expr:
    if isinstance(value, str):
        try:
            return parse_expression(value, symbols)
        except ValueError as exc:
            _fail(path, str(exc))
    if isinstance(value, dict):
        terms = value.get("terms")
        if set(value) != {"terms"} or not isinstance(terms, list):
            _fail(path, "polynomial tables are {\"terms\": [{\"x\": i, \"t\": j, \"c\": coefficient}, ...]}")
        expr = sympy.Integer(0)
        for j, term in enumerate(terms):
            tp = f"{path}/terms/{j}"
            term = _object(term, tp)
            for key in term:
                if key not in ("x", "t", "c"):
                    _fail(f"{tp}/{key}", "unknown field")
            px = _int(term.get("x", 0), f"{tp}/x")
            pt = _int(term.get("t", 0), f"{tp}/t")
            if pt and "t" not in symbols:
                _fail(f"{tp}/t", "powers of t need a family section")
            c = _sympy_number(_entry(term.get("c"), f"{tp}/c"))
            expr += c * X**px * T**pt
        return expr
    return _sympy_number(_entry(value, path))


def _sympy_number(v) -> sympy.Expr:
    if isinstance(v, complex):
        return sympy.Float(v.real) + sympy.I * sympy.Float(v.imag)
    if isinstance(v, Fraction):
        return sympy.Rational(v.numerator, v.denominator)
    return sympy.sympify(v)


def _curve_map(raw, path: str, doc: dict) -> dict:
    raw = _object(raw, path)
    for key in raw:
        if key not in ("base", "r", "n", "k", "entries", "family"):
            _fail(f"{path}/{key}", "unknown field")
    base = _base(raw.get("base", {}), f"{path}/base")
    family = None
    symbols = {"x": X}
    if raw.get("family") is not None:
        fp = f"{path}/family"
        fam = _object(raw["family"], fp)
        for key in fam:
            if key not in ("name", "lo", "hi", "default"):
                _fail(f"{fp}/{key}", "unknown field")
        lo = float(_number(fam.get("lo", 0), f"{fp}/lo"))
        hi = float(_number(fam.get("hi", 1), f"{fp}/hi"))
        if not hi >= lo:
            _fail(fp, "family range needs hi >= lo")
        default = float(_number(fam.get("default", hi), f"{fp}/default"))
        name = fam.get("name", "")
        if not isinstance(name, str):
            _fail(f"{fp}/name", "expected a string")
        family = {"name": name, "lo": lo, "hi": hi, "default": default}
        symbols["t"] = T
    entries_raw = raw.get("entries")
    if not isinstance(entries_raw, list) or not entries_raw:
        _fail(f"{path}/entries", "expected a nonempty list of matrices")
    n = _int(raw.get("n", len(entries_raw)), f"{path}/n", 1)
    if n != len(entries_raw):
        _fail(f"{path}/n", f"n={n} but {len(entries_raw)} matrices given")
    first = entries_raw[0]
    r = _int(raw.get("r", len(first) if isinstance(first, list) else 0), f"{path}/r", 1)
    mats = []
    for i, m in enumerate(entries_raw):
        mp = f"{path}/entries/{i}"
        if not isinstance(m, list) or len(m) != r or any(not isinstance(row, list) or len(row) != r for row in m):
            _fail(mp, f"expected a square {r}x{r} matrix")
        mats.append(sympy.Matrix([[_curve_entry(e, f"{mp}/{a}/{b}", symbols) for b, e in enumerate(row)]
                                  for a, row in enumerate(m)]))
    doc.update(kind="curve_map", r=r, n=n, k=_k(raw.get("k"), f"{path}/k"), base=base, entries=mats, family=family)
    return doc


def parse_document(obj: Any) -> MapSpecDoc:
    """Validate an already-decoded JSON value."""
    obj = _object(obj, "")
    version = obj.get("version")
    if not isinstance(version, str):
        _fail("/version", "required string")
    if version not in SUPPORTED_VERSIONS:
        raise VersionUnsupported(f"version {version!r} is not supported (supported: {list(SUPPORTED_VERSIONS)})")
    for key in obj:
        if key not in ("version", "point_map", "curve_map", "options"):
            _fail(f"/{key}", "unknown field")
    has_point, has_curve = "point_map" in obj, "curve_map" in obj
    if has_point == has_curve:
        _fail("", "exactly one of point_map and curve_map is required")
    doc: dict = {"version": version}
    if has_point:
        _point_map(obj["point_map"], "/point_map", doc)
    else:
        _curve_map(obj["curve_map"], "/curve_map", doc)
    doc["options"] = _options(obj.get("options"), "/options")
    return MapSpecDoc(**doc)


def parse_spec(document: bytes | str) -> MapSpecDoc:
    """Decode UTF-8 JSON and validate it; errors carry a JSON pointer."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"document is not UTF-8: {exc}") from None
    try:
        obj = json.loads(document, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    return parse_document(obj)


def _reject_constant(name: str):
    raise ValueError(f"non-finite number {name} is not allowed")


# ---------------------------------------------------------------------------
# Serialization


def _json_number(v):
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def _expr_json(e: sympy.Expr):
    e = sympy.sympify(e)
    if e.is_Integer:
        return int(e)
    if e.is_Rational:
        return f"{e.p}/{e.q}"
    return sympy.sstr(e, full_prec=True)


def document_to_json(doc: MapSpecDoc) -> dict:
    out: dict = {"version": doc.version}
    k = "inf" if doc.k == C_INFINITY else int(doc.k)
    if doc.kind == "point_map":
        out["point_map"] = {"r": doc.r, "n": doc.n, "k": k,
                            "matrices": [[[_json_number(e) for e in row] for row in m] for m in doc.matrices]}
    else:
        body = {"base": doc.base.to_json(), "r": doc.r, "n": doc.n, "k": k,
                "entries": [[[_expr_json(m[a, b]) for b in range(doc.r)] for a in range(doc.r)]
                            for m in doc.entries]}
        if doc.family is not None:
            body["family"] = dict(doc.family)
        out["curve_map"] = body
    if doc.options:
        out["options"] = dict(doc.options)
    return out


def serialize(doc: MapSpecDoc) -> bytes:
    return json.dumps(document_to_json(doc), indent=2, sort_keys=True).encode("utf-8")


def curve_map_document(cmap: MatrixCurveMap, family: FamilySpec | None = None) -> MapSpecDoc:
    """Document for a curve map (or a whole family)."""
    if family is not None:
        fam = {"name": family.name, "lo": family.t_lo, "hi": family.t_hi, "default": family.default_t}
        return MapSpecDoc("1.0", "curve_map", family.ms[0].shape[0], len(family.ms), C_INFINITY,
                          base=family.base, entries=list(family.ms), family=fam)
    mats = [m.subs(cmap.variable, X) for m in cmap.ms]
    return MapSpecDoc("1.0", "curve_map", cmap.r, cmap.n, cmap.k, base=cmap.base, entries=mats,
                      options={"tol": cmap.tol} if cmap.tol != DEFAULT_TOL else {})


def matrix_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def fnspec_to_json(f: FnSpec) -> dict:
    def table(t):
        return [{"index": list(k), "c": _json_number(v)} for k, v in sorted(t.items())]

    if f.kind == "polynomial":
        return {"kind": "polynomial", "n": f.n, "terms": table(f.num)}
    if f.kind == "rational":
        return {"kind": "rational", "n": f.n, "num": table(f.num), "den": table(f.den)}
    if f.kind == "analytic":
        return {"kind": "analytic", "n": f.n, "primitive": f.primitive, "argument": table(f.num)}
    if f.kind in ("sum", "product"):
        return {"kind": f.kind, "n": f.n, "parts": [fnspec_to_json(p) for p in f.parts]}
    raise ValueError("numeric function specs cannot be serialized")


def fnspec_from_json(obj: dict) -> FnSpec:
    def table(rows):
        return {tuple(r["index"]): _entry(r["c"], "") for r in rows}

    kind, n = obj["kind"], obj["n"]
    if kind == "polynomial":
        return FnSpec.polynomial(table(obj["terms"]) or {(0,) * n: 0}, n)
    if kind == "rational":
        return FnSpec.rational(table(obj["num"]) or {(0,) * n: 0}, table(obj["den"]), n)
    if kind == "analytic":
        return FnSpec.analytic(obj["primitive"], table(obj["argument"]) or {(0,) * n: 0}, n)
    if kind in ("sum", "product"):
        parts = [fnspec_from_json(p) for p in obj["parts"]]
        return FnSpec.sum(*parts) if kind == "sum" else FnSpec.product(*parts)
    raise ValueError(f"unknown function kind {kind!r}")


# ---------------------------------------------------------------------------
# CSV and SVG


def _g(v: float) -> str:
    return "%.17g" % v


def branch_csv(diag) -> str:
    """Rows ``x, branch_id, y1..yn, length, order, filtration`` sorted by grid position then id."""
    header = ["x", "branch_id"] + [f"y{i + 1}" for i in range(diag.n)] + ["length", "order", "filtration"]
    rows = []
    for t in diag.tracks:
        for p in t.points:
            rows.append((p.index, t.id, p))
    rows.sort(key=lambda r: (r[0], r[1]))
    lines = [",".join(header)]
    for _, tid, p in rows:
        cells = [_g(p.x), str(tid)] + [_g(v) for v in p.point]
        cells += [str(p.length), str(p.order), ";".join(str(d) for d in p.filtration)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def emit_branch_csv(diag, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(branch_csv(diag))


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def branch_svg(diag, width: int = 480, height: int = 320) -> str:
    """One panel per target axis, tracks as polylines; nilpotency drawn as a halo, events as markers."""
    axes = max(1, diag.n)
    pad = 36
    total_h = axes * height
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{total_h}" '
             f'viewBox="0 0 {width} {total_h}">',
             f'<rect width="{width}" height="{total_h}" fill="white"/>']
    xs = np.asarray(diag.grid, dtype=float)
    x0, x1 = (float(xs[0]), float(xs[-1])) if len(xs) else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    for axis in range(axes):
        top = axis * height
        vals = [p.point[axis] for t in diag.tracks for p in t.points] or [0.0]
        y0, y1 = min(vals), max(vals)
        if y1 - y0 < 1e-12:
            y0, y1 = y0 - 1.0, y1 + 1.0

        def sx(x):
            return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

        def sy(y, top=top, y0=y0, y1=y1):
            return top + height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

        parts.append(f'<g id="panel-y{axis + 1}">')
        parts.append(f'<rect x="{pad}" y="{top + pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
                     f'fill="none" stroke="#888" stroke-width="0.5"/>')
        parts.append(f'<text x="{pad}" y="{top + pad - 8}" font-size="12" font-family="sans-serif">'
                     f'x vs y{axis + 1}</text>')
        for t in diag.tracks:
            color = _PALETTE[t.id % len(_PALETTE)]
            runs: list[list] = []
            for p in t.points:
                if runs and runs[-1][-1].index == p.index - 1:
                    runs[-1].append(p)
                else:
                    runs.append([p])
            for run in runs:
                pts = " ".join(f"{sx(p.x):.3f},{sy(p.point[axis]):.3f}" for p in run)
                order = max(p.order for p in run)
                if order > 1:
                    parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-opacity="0.25" '
                                 f'stroke-width="{2 + 4 * (order - 1)}" data-order="{order}"/>')
                parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5" '
                             f'data-track="{t.id}"/>')
        for e in diag.events:
            t = diag.track(e.tracks[0])
            if not t.points:
                continue
            near = min(t.points, key=lambda p: abs(p.x - e.x))
            parts.append(f'<circle cx="{sx(e.x):.3f}" cy="{sy(near.point[axis]):.3f}" r="3" fill="none" '
                         f'stroke="black" data-event="{e.kind}"/>')
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_svg(diag, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(branch_svg(diag))


def to_jsonable(obj):
    """Recursively convert numpy / Fraction / complex values for ``json.dumps``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    if isinstance(obj, Fraction):
        return _json_number(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True)
