"""Matrix-valued families over a one-dimensional base.

A :class:`MatrixCurveMap` assigns to each base point ``x`` the commuting
matrices ``m^1(x), ..., m^n(x)`` that a map from an Azumaya curve to ``R^n``
sends the target coordinates to.  Entries are sympy expressions in ``x``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy

from .errors import DimensionMismatch, MonodromyMismatch, OutOfRange
from .linalg import DEFAULT_TOL
from .point import C_INFINITY, AzumayaPointMap

X = sympy.Symbol("x", real=True)
T = sympy.Symbol("t", real=True)
Z = sympy.Symbol("z")  # complex base coordinate

_NAMESPACE = {
    "sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp, "sqrt": sympy.sqrt,
    "pi": sympy.pi, "I": sympy.I, "conjugate": sympy.conjugate,
    "Integer": sympy.Integer, "Float": sympy.Float, "Rational": sympy.Rational,
    "Symbol": sympy.Symbol,
}


def parse_expression(text: str, symbols: Mapping[str, sympy.Symbol]) -> sympy.Expr:
    """Parse ``text`` allowing only the given symbols and a few elementary functions."""
    local = dict(symbols)
    try:
        expr = sympy.parse_expr(text, local_dict=local, global_dict=dict(_NAMESPACE))
    except Exception as exc:  # sympy's parser raises many unrelated types
        raise ValueError(f"cannot parse {text!r}: {exc}") from None
    stray = {str(s) for s in expr.free_symbols} - set(symbols)
    if stray:
        raise ValueError(f"unknown symbols {sorted(stray)} in {text!r}")
    return expr


@dataclass(frozen=True)
class Base:
    """Parameter domain: ``interval`` ``[lo, hi]``, ``circle`` ``[0, 2 pi)``, or a complex ``rectangle``."""

    kind: str = "interval"
    lo: float = -1.0
    hi: float = 1.0
    lo_im: float = 0.0
    hi_im: float = 0.0

    def __post_init__(self):
        if self.kind not in ("interval", "circle", "rectangle"):
            raise ValueError(f"unknown base kind {self.kind!r}")
        if self.kind != "circle" and not self.hi > self.lo:
            raise ValueError("base must have hi > lo")
        if self.kind == "rectangle" and not self.hi_im > self.lo_im:
            raise ValueError("rectangle base must have hi_im > lo_im")

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Base":
        return cls("interval", float(lo), float(hi))

    @classmethod
    def circle(cls) -> "Base":
        return cls("circle", 0.0, 2 * math.pi)

    @classmethod
    def rectangle(cls, lo: complex, hi: complex) -> "Base":
        lo, hi = complex(lo), complex(hi)
        return cls("rectangle", lo.real, hi.real, lo.imag, hi.imag)

    def grid(self, size: int) -> np.ndarray:
        if size < 2:
            raise ValueError("grid_size must be at least 2")
        if self.kind == "circle":
            return np.arange(size) * (2 * math.pi / size)
        return np.linspace(self.lo, self.hi, size)

    def contains(self, x: float, slack: float = 1e-12) -> bool:
        if self.kind == "circle":
            return True
        return self.lo - slack <= x <= self.hi + slack

    def to_json(self) -> dict:
        if self.kind == "circle":
            return {"kind": "circle"}
        out = {"kind": self.kind, "lo": self.lo, "hi": self.hi}
        if self.kind == "rectangle":
            out.update(lo_im=self.lo_im, hi_im=self.hi_im)
        return out


def _matrix(m, symbols: Mapping[str, sympy.Symbol]) -> sympy.Matrix:
    if isinstance(m, sympy.MatrixBase):
        return sympy.Matrix(m)
    rows = []
    for row in m:
        rows.append([parse_expression(e, symbols) if isinstance(e, str) else sympy.sympify(e) for e in row])
    return sympy.Matrix(rows)


@dataclass(frozen=True, eq=False)
class MatrixCurveMap:
    """Coordinate images ``ms[i](x)`` over ``base``.

    ``variable`` is the base coordinate; for a rectangle base it is a complex
    symbol and fibers need not have real spectra.
    """

    base: Base
    ms: tuple[sympy.Matrix, ...]
    k: float = C_INFINITY
    tol: float = DEFAULT_TOL
    variable: sympy.Symbol = X
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_entries(cls, base: Base, ms: Sequence, k=C_INFINITY, tol: float = DEFAULT_TOL,
                     variable: sympy.Symbol | None = None, name: str = "") -> "MatrixCurveMap":
        var = variable if variable is not None else (Z if base.kind == "rectangle" else X)
        mats = tuple(_matrix(m, {str(var): var}) for m in ms)
        if not mats:
            raise DimensionMismatch("a curve map needs at least one coordinate matrix")
        r = mats[0].shape[0]
        for m in mats:
            if m.shape != (r, r):
                raise DimensionMismatch("coordinate matrices must be square of a common size")
            stray = m.free_symbols - {var}
            if stray:
                raise ValueError(f"entries depend on {sorted(map(str, stray))}, expected only {var}")
        return cls(base, mats, k, float(tol), var, name)

    @property
    def r(self) -> int:
        return self.ms[0].shape[0]

    @property
    def n(self) -> int:
        return len(self.ms)

    def _functions(self, derivative: bool = False) -> list[Callable]:
        key = ("fd" if derivative else "f")
        if key not in self._cache:
            mats = [m.diff(self.variable) if derivative else m for m in self.ms]
            self._cache[key] = [sympy.lambdify(self.variable, m, modules="numpy") for m in mats]
        return self._cache[key]

    def matrices_at(self, x) -> list[np.ndarray]:
        return [np.array(f(x), dtype=complex).reshape(self.r, self.r) for f in self._functions()]

    def derivatives_at(self, x) -> list[np.ndarray]:
        return [np.array(f(x), dtype=complex).reshape(self.r, self.r) for f in self._functions(True)]

    def fiber(self, x) -> AzumayaPointMap:
        return AzumayaPointMap.from_matrices(self.matrices_at(x), k=self.k, tol=self.tol)

    def is_polynomial(self) -> bool:
        return all(e.is_polynomial(self.variable) for m in self.ms for e in m)

    def __repr__(self) -> str:
        return f"MatrixCurveMap(name={self.name!r}, r={self.r}, n={self.n}, base={self.base})"


# ---------------------------------------------------------------------------
# Characteristic polynomials


def characteristic_polynomials(cmap: MatrixCurveMap) -> list[sympy.Poly]:
    """``det(y_i I - m^i(x))`` for each coordinate, as polynomials in ``(x, y_i)``."""
    out = []
    for i, m in enumerate(cmap.ms):
        y = sympy.Symbol(f"y{i + 1}")
        mat = y * sympy.eye(cmap.r) - m
        det = sympy.expand(mat.det(method="berkowitz"))
        out.append(sympy.Poly(det, cmap.variable, y))
    return out


@functools.lru_cache(maxsize=256)
def _coefficient_functions(poly: sympy.Poly):
    xs, y = poly.gens
    coeffs = sympy.Poly(poly.as_expr(), y).all_coeffs()
    return tuple(sympy.lambdify(xs, c, modules="numpy") for c in coeffs)


def graph_residual(poly: sympy.Poly, m: np.ndarray, x: float) -> float:
    """``||p(x, m)||_F``: the polynomial in ``y`` at ``x`` evaluated on the matrix ``m`` (Horner)."""
    out = np.zeros_like(m, dtype=complex)
    eye = np.eye(m.shape[0], dtype=complex)
    for c in _coefficient_functions(poly):
        out = out @ m + complex(c(x)) * eye
    return float(np.linalg.norm(out))


# ---------------------------------------------------------------------------
# Families


@dataclass(frozen=True, eq=False)
class FamilySpec:
    """Curve maps depending on a real parameter ``t`` in ``[t_lo, t_hi]``."""

    name: str
    base: Base
    ms: tuple[sympy.Matrix, ...]
    t_lo: float = 0.0
    t_hi: float = 1.0
    default_t: float = 1.0
    parameter: sympy.Symbol = T
    variable: sympy.Symbol = X

    @classmethod
    def from_entries(cls, name: str, base: Base, ms: Sequence, t_range=(0.0, 1.0),
                     default_t: float | None = None) -> "FamilySpec":
        symbols = {"x": X, "t": T}
        mats = tuple(_matrix(m, symbols) for m in ms)
        lo, hi = map(float, t_range)
        return cls(name, base, mats, lo, hi, hi if default_t is None else float(default_t))


def evaluate_family(spec: FamilySpec, t=None, tol: float = DEFAULT_TOL) -> MatrixCurveMap:
    """Slice of the family at parameter ``t`` (exact when ``t`` is rational)."""
    t = spec.default_t if t is None else t
    if not (spec.t_lo - 1e-12 <= float(t) <= spec.t_hi + 1e-12):
        raise OutOfRange(f"t={t} outside [{spec.t_lo}, {spec.t_hi}] for family {spec.name!r}")
    value = sympy.nsimplify(t, rational=True) if isinstance(t, float) else sympy.sympify(t)
    mats = tuple(m.subs(spec.parameter, value) for m in spec.ms)
    return MatrixCurveMap(spec.base, mats, C_INFINITY, tol, spec.variable, f"{spec.name}@t={t}")


def _deformation(lower1, lower2) -> sympy.Matrix:
    """``y^2`` image in the four deformations of the three-line map."""
    return sympy.Matrix([[-T * X, 0, 0], [lower1, T, 0], [0, lower2, T * X]])


BUILTIN_FAMILIES: dict[str, FamilySpec] = {}


def _register(name: str, lower1, lower2, default_t) -> None:
    BUILTIN_FAMILIES[name] = FamilySpec(
        name=name,
        base=Base.interval(-2, 2),
        ms=(X * sympy.eye(3), _deformation(lower1, lower2)),
        default_t=default_t,
    )


_register("7.2.2-phi1", T, T, 1)
_register("7.2.2-phi2", T, 1, 0)
_register("7.2.2-phi3", 1, T, 0)
_register("7.2.2-phi4", 1, 1, 0)


def builtin_family(name: str) -> FamilySpec:
    try:
        return BUILTIN_FAMILIES[name]
    except KeyError:
        raise KeyError(f"unknown family {name!r}; known: {sorted(BUILTIN_FAMILIES)}") from None


# ---------------------------------------------------------------------------
# Push-forward along a branched cover


def _cycles(perm: Sequence[int]) -> list[list[int]]:
    seen, out = set(), []
    for start in range(len(perm)):
        if start in seen:
            continue
        cycle, j = [], start
        while j not in seen:
            seen.add(j)
            cycle.append(j)
            j = perm[j]
        out.append(cycle)
    return out


W = sympy.Symbol("w")


def _cyclic_block(f: sympy.Expr, c: int, z: sympy.Symbol) -> sympy.Matrix:
    """Multiplication by ``f(w)`` on ``C[z][w]/(w^c - z)`` in the basis ``1, w, ..., w^(c-1)``."""
    if c == 1:
        return sympy.Matrix([[sympy.expand(f.subs(W, z))]])
    if not f.is_polynomial(W):
        raise MonodromyMismatch("branch functions on a cyclic sheet must be polynomial in w")
    block = sympy.zeros(c, c)
    for j in range(c):
        poly = sympy.Poly(sympy.expand(f * W**j), W)
        for (e,), coef in poly.terms():
            q, rem = divmod(e, c)
            block[rem, j] += coef * z**q
    return block.applyfunc(sympy.expand)


def from_branched_cover(
    branches: Sequence,
    monodromy: Sequence[int] | None = None,
    base: Base | str = "interval",
    ranks: Sequence[int] | None = None,
    interval: tuple[float, float] | None = None,
    variable: sympy.Symbol | None = None,
    tol: float = DEFAULT_TOL,
) -> MatrixCurveMap:
    """Push forward the trivial line bundle along a branched cover of the base.

    ``monodromy`` permutes the sheets; each cycle of length ``c`` is one
    connected component of the cover, locally ``w -> w^c``, and carries one
    entry of ``branches``: a tuple of ``n`` functions of the cover
    coordinate ``w`` (for ``c = 1`` they may equally be written in ``x``).
    ``ranks`` repeats a component that many times (a trivial bundle of that
    rank on it).  A ``circle`` base means the monodromy is taken around the
    branch point; the returned family lives on the real interval
    ``interval`` (default ``[0, 1]``) of the base, where the spectrum is real.
    """
    base_obj = base if isinstance(base, Base) else None
    kind = base_obj.kind if base_obj else base
    if kind not in ("interval", "circle"):
        raise ValueError("base must be 'interval' or 'circle'")
    comps = [tuple(b) if isinstance(b, (tuple, list)) else (b,) for b in branches]
    if not comps:
        raise MonodromyMismatch("at least one branch is required")
    n = len(comps[0])
    if any(len(c) != n for c in comps):
        raise MonodromyMismatch("all branches need the same number of target coordinates")
    perm = list(range(len(comps))) if monodromy is None else [int(p) for p in monodromy]
    if sorted(perm) != list(range(len(perm))):
        raise MonodromyMismatch(f"{perm} is not a permutation of the sheets")
    cycles = _cycles(perm)
    if kind == "interval" and any(len(c) > 1 for c in cycles):
        raise MonodromyMismatch("an interval base admits only the identity monodromy")
    if len(cycles) != len(comps):
        raise MonodromyMismatch(f"{len(cycles)} cover components but {len(comps)} branch entries")
    ranks = [1] * len(comps) if ranks is None else [int(k) for k in ranks]
    if len(ranks) != len(comps) or any(k < 1 for k in ranks):
        raise MonodromyMismatch("ranks must give a positive rank per branch")
    var = variable if variable is not None else X
    symbols = {"w": W, "x": var, str(var): var}
    blocks_per_axis: list[list[sympy.Matrix]] = [[] for _ in range(n)]
    for comp, cycle, rank in zip(comps, cycles, ranks):
        c = len(cycle)
        for axis, f in enumerate(comp):
            expr = parse_expression(f, symbols) if isinstance(f, str) else sympy.sympify(f)
            if c > 1:
                expr = expr.subs(var, W)
            block = _cyclic_block(expr, c, var)
            blocks_per_axis[axis].extend([block] * rank)
    ms = tuple(sympy.diag(*blocks) for blocks in blocks_per_axis)
    if base_obj is not None and kind == "interval":
        out_base = base_obj
    elif interval is not None:
        out_base = Base.interval(*interval)
    else:
        out_base = Base.interval(0, 1) if kind == "circle" else Base.interval(-1, 1)
    return MatrixCurveMap(out_base, ms, C_INFINITY, tol, var, "branched-cover")
