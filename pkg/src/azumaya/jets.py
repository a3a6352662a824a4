"""Truncated multivariate jets of test functions.

A :class:`FnSpec` describes a function on ``R^n`` in a form whose derivatives
can be computed without truncation error: a polynomial, a quotient of
polynomials, ``sin``/``cos``/``exp`` of a polynomial, or sums and products of
these.  Arbitrary callables are accepted in a separate ``numeric`` mode and
differentiated by central differences.

Jets store raw derivative values ``d^alpha f(p)``, not Taylor coefficients.
Internally everything is done with Taylor coefficients
``d^alpha f(p) / alpha!`` because products and quotients are plain truncated
series arithmetic in that form.

When every coefficient and the base point are exact (``int`` or
``Fraction``), polynomial and rational jets are computed in exact rational
arithmetic.
"""

from __future__ import annotations

import cmath
import itertools
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Number
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import BasePointMismatch, OrderTooHigh, PoleAtPoint

JET_ORDER_CAP = 12
PRIMITIVES = ("sin", "cos", "exp")

Index = tuple[int, ...]


@lru_cache(maxsize=None)
def multi_indices(n: int, d: int) -> tuple[Index, ...]:
    """All multi-indices of length ``n`` with total degree at most ``d``, graded."""
    out: list[Index] = []
    for total in range(d + 1):
        for combo in itertools.combinations_with_replacement(range(n), total):
            alpha = [0] * n
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
    return tuple(out)


def _factorial_multi(alpha: Index) -> int:
    out = 1
    for a in alpha:
        out *= math.factorial(a)
    return out


def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def _to_number(x):
    """Normalize a coefficient: keep ints/Fractions, floats and complex as is."""
    if isinstance(x, bool):
        return int(x)
    if isinstance(x, (int, Fraction, float, complex)):
        return x
    if isinstance(x, Number):
        return complex(x) if isinstance(x, complex) else float(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (list, tuple)) and len(x) == 2:
        re, im = _to_number(x[0]), _to_number(x[1])
        return re if im == 0 else complex(re, im)
    raise TypeError(f"unsupported coefficient {x!r}")


def _clean_table(table: Mapping, n: int) -> dict[Index, object]:
    out: dict[Index, object] = {}
    for alpha, c in table.items():
        key = (alpha,) if isinstance(alpha, int) else tuple(int(a) for a in alpha)
        if len(key) != n or any(a < 0 for a in key):
            raise ValueError(f"bad multi-index {alpha!r} for arity {n}")
        c = _to_number(c)
        if isinstance(c, (float, complex)) and not cmath.isfinite(c):
            raise ValueError("coefficients must be finite")
        if c != 0:
            out[key] = out.get(key, 0) + c
    return {k: v for k, v in out.items() if v != 0}


@dataclass(frozen=True, eq=False)
class FnSpec:
    """A test function on ``R^n``.

    Use the constructors (:meth:`polynomial`, :meth:`rational`,
    :meth:`analytic`, :meth:`numeric`, :meth:`parse`) rather than the raw
    initializer.  Polynomial specs support ``+``, ``-`` and ``*``; mixing
    kinds produces ``sum``/``product`` composites.
    """

    kind: str
    n: int
    num: Mapping[Index, object] | None = None
    den: Mapping[Index, object] | None = None
    primitive: str | None = None
    parts: tuple["FnSpec", ...] = ()
    fn: Callable | None = None

    # -- constructors -------------------------------------------------
    @classmethod
    def polynomial(cls, coeffs: Mapping, n: int | None = None) -> "FnSpec":
        """Polynomial from ``{multi-index: coefficient}``.

        >>> FnSpec.polynomial({(2, 1): 1})(1.0, 2.0)
        2.0
        """
        n = _infer_arity(coeffs, n)
        return cls("polynomial", n, num=_clean_table(coeffs, n))

    @classmethod
    def constant(cls, c, n: int) -> "FnSpec":
        return cls.polynomial({(0,) * n: c}, n)

    @classmethod
    def coordinate(cls, i: int, n: int) -> "FnSpec":
        alpha = [0] * n
        alpha[i] = 1
        return cls.polynomial({tuple(alpha): 1}, n)

    @classmethod
    def rational(cls, num: Mapping, den: Mapping, n: int | None = None) -> "FnSpec":
        n = _infer_arity(num, _infer_arity(den, n))
        d = _clean_table(den, n)
        if not d:
            raise ValueError("denominator is identically zero")
        return cls("rational", n, num=_clean_table(num, n), den=d)

    @classmethod
    def analytic(cls, primitive: str, argument, n: int | None = None) -> "FnSpec":
        """``primitive(argument)`` with ``primitive`` in sin/cos/exp and a polynomial argument."""
        if primitive not in PRIMITIVES:
            raise ValueError(f"primitive must be one of {PRIMITIVES}")
        if isinstance(argument, FnSpec):
            if argument.kind != "polynomial":
                raise ValueError("argument must be a polynomial")
            return cls("analytic", argument.n, num=argument.num, primitive=primitive)
        n = _infer_arity(argument, n)
        return cls("analytic", n, num=_clean_table(argument, n), primitive=primitive)

    @classmethod
    def numeric(cls, fn: Callable, n: int) -> "FnSpec":
        """Black-box callable ``fn(*y)``; jets are finite-difference approximations."""
        return cls("numeric", n, fn=fn)

    @classmethod
    def product(cls, *factors: "FnSpec") -> "FnSpec":
        _same_arity(factors)
        return cls("product", factors[0].n, parts=tuple(factors))

    @classmethod
    def sum(cls, *terms: "FnSpec") -> "FnSpec":
        _same_arity(terms)
        return cls("sum", terms[0].n, parts=tuple(terms))

    @classmethod
    def parse(cls, text: str, n: int) -> "FnSpec":
        """Parse an expression in ``y1..yn`` (``y`` is accepted when ``n == 1``)."""
        from ._expr import fnspec_from_text

        return fnspec_from_text(text, n)

    # -- properties ---------------------------------------------------
    @property
    def is_exact(self) -> bool:
        """True when all coefficients are exact rationals (no floats)."""
        if self.kind in ("polynomial", "rational"):
            tables = [self.num or {}, self.den or {}]
            return all(_is_exact(c) for t in tables for c in t.values())
        if self.kind in ("sum", "product"):
            return all(p.is_exact for p in self.parts)
        return False

    def degree(self) -> int:
        """Total degree of a polynomial spec."""
        if self.kind != "polynomial":
            raise ValueError("degree is defined for polynomial specs only")
        return max((sum(a) for a in self.num), default=0)

    def __call__(self, *y):
        if len(y) == 1 and isinstance(y[0], (tuple, list, np.ndarray)):
            y = tuple(y[0])
        if len(y) != self.n:
            raise ValueError(f"expected {self.n} arguments")
        if self.kind == "polynomial":
            return _poly_value(self.num, y)
        if self.kind == "rational":
            den = _poly_value(self.den, y)
            if den == 0:
                raise PoleAtPoint(f"denominator vanishes at {y}")
            return _poly_value(self.num, y) / den
        if self.kind == "analytic":
            u = _poly_value(self.num, y)
            return _primitive_fn(self.primitive, u)
        if self.kind == "product":
            out = 1
            for p in self.parts:
                out = out * p(*y)
            return out
        if self.kind == "sum":
            return sum(p(*y) for p in self.parts)
        return self.fn(*y)

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other: "FnSpec") -> "FnSpec":
        if isinstance(other, Number):
            other = FnSpec.constant(other, self.n)
        _same_arity((self, other))
        if self.kind == other.kind == "polynomial":
            table = dict(self.num)
            for a, c in other.num.items():
                table[a] = table.get(a, 0) + c
            return FnSpec.polynomial(table, self.n)
        return FnSpec.sum(self, other)

    __radd__ = __add__

    def __neg__(self) -> "FnSpec":
        return self * -1

    def __sub__(self, other: "FnSpec") -> "FnSpec":
        return self + (-other)

    def __mul__(self, other) -> "FnSpec":
        if isinstance(other, Number):
            other = FnSpec.constant(other, self.n)
        _same_arity((self, other))
        if self.kind == other.kind == "polynomial":
            table: dict[Index, object] = {}
            for a, c in self.num.items():
                for b, e in other.num.items():
                    key = tuple(i + j for i, j in zip(a, b))
                    table[key] = table.get(key, 0) + c * e
            return FnSpec.polynomial(table, self.n)
        return FnSpec.product(self, other)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "FnSpec":
        out = FnSpec.constant(1, self.n)
        for _ in range(int(k)):
            out = out * self
        return out

    def to_json(self) -> dict:
        """JSON-compatible description (numeric specs cannot be serialized)."""
        from .io import fnspec_to_json

        return fnspec_to_json(self)


def _infer_arity(table, n):
    if n is not None:
        return int(n)
    for alpha in table:
        return 1 if isinstance(alpha, int) else len(alpha)
    raise ValueError("cannot infer arity from an empty table; pass n")


def _same_arity(specs: Sequence[FnSpec]) -> None:
    if not specs:
        raise ValueError("need at least one operand")
    if len({s.n for s in specs}) != 1:
        raise ValueError("operands have different arities")


def _poly_value(table: Mapping[Index, object], y) -> object:
    total = 0
    for alpha, c in table.items():
        term = c
        for yi, a in zip(y, alpha):
            if a:
                term = term * yi**a
        total = total + term
    return total


def _primitive_fn(name: str, u):
    if isinstance(u, complex):
        return {"sin": cmath.sin, "cos": cmath.cos, "exp": cmath.exp}[name](u)
    return {"sin": math.sin, "cos": math.cos, "exp": math.exp}[name](float(u))


# ---------------------------------------------------------------------------
# Jets


@dataclass(frozen=True)
class Jet:
    """Raw partial derivatives ``d^alpha f(base_point)`` for ``|alpha| <= order``."""

    base_point: tuple
    order: int
    derivs: Mapping[Index, object]

    @property
    def n(self) -> int:
        return len(self.base_point)

    def __getitem__(self, alpha) -> object:
        if isinstance(alpha, int):
            alpha = (alpha,)
        return self.derivs[tuple(alpha)]

    def as_list(self) -> list:
        """Values in graded order (for ``n == 1`` simply ``f, f', f'', ...``)."""
        return [self.derivs[a] for a in multi_indices(self.n, self.order)]

    def taylor(self) -> dict[Index, object]:
        return {a: _div(v, _factorial_multi(a)) for a, v in self.derivs.items()}

    def taylor_polynomial(self, y) -> object:
        """Value of the degree-``order`` Taylor polynomial at ``y``."""
        total = 0
        for alpha, coef in self.taylor().items():
            term = coef
            for yi, pi, a in zip(y, self.base_point, alpha):
                if a:
                    term = term * (yi - pi) ** a
            total = total + term
        return total

    @classmethod
    def from_values(cls, values: Sequence, base_point=(0,), order: int | None = None) -> "Jet":
        """Build a one-variable jet from ``f(p), f'(p), ...``."""
        order = len(values) - 1 if order is None else order
        return cls(tuple(base_point), order, {(k,): values[k] for k in range(order + 1)})


def _div(v, k: int):
    if _is_exact(v):
        return Fraction(v, k)
    return v / k


def extract_jet(
    f: FnSpec, p: Sequence, d: int, h: float | None = None, cap: int = JET_ORDER_CAP
) -> Jet:
    """Jet of ``f`` at ``p`` up to order ``d``.

    Polynomial, rational, analytic and composite specs are differentiated in
    closed form.  ``numeric`` specs use central differences with second-order
    accuracy and step ``h`` (default ``eps**(1/(d+2)) * max(1, |p|)``).

    >>> extract_jet(FnSpec.polynomial({(2, 1): 1}), (1, 1), 2).as_list()
    [1, 2, 1, 2, 2, 0]
    """
    d = int(d)
    if d < 0:
        raise ValueError("order must be nonnegative")
    if d > cap:
        raise OrderTooHigh(f"jet order {d} exceeds cap {cap}")
    p = tuple(p)
    if len(p) != f.n:
        raise ValueError(f"base point has {len(p)} coordinates, function has arity {f.n}")
    if f.kind == "numeric":
        return _finite_difference_jet(f, p, d, h)
    series = taylor_series(f, p, d)
    derivs = {a: _plain(series.get(a, 0) * _factorial_multi(a)) for a in multi_indices(f.n, d)}
    return Jet(p, d, derivs)


def _plain(v):
    return v.item() if isinstance(v, np.generic) else v


def taylor_series(f: FnSpec, p: Sequence, d: int) -> dict[Index, object]:
    """Taylor coefficients ``d^alpha f(p) / alpha!`` for ``|alpha| <= d`` (closed-form kinds)."""
    exact = f.is_exact and all(_is_exact(x) for x in p)
    if not exact:
        p = tuple(complex(x) if isinstance(x, complex) else float(x) for x in p)
    if f.kind == "polynomial":
        return _poly_shift(f.num, p, d, exact)
    if f.kind == "rational":
        num = _poly_shift(f.num, p, d, exact)
        den = _poly_shift(f.den, p, d, exact)
        zero = (0,) * f.n
        c0 = den.get(zero, 0)
        if exact:
            singular = c0 == 0
        else:
            size = sum(abs(c) * math.prod(abs(x) ** a for x, a in zip(p, alpha))
                       for alpha, c in f.den.items())
            singular = abs(c0) <= 64 * sys.float_info.epsilon * size
        if singular:
            raise PoleAtPoint(f"denominator vanishes at {p}")
        return _series_div(num, den, f.n, d)
    if f.kind == "analytic":
        u = _poly_shift(f.num, p, d, False)
        return _series_compose(f.primitive, u, f.n, d)
    if f.kind == "product":
        out = taylor_series(f.parts[0], p, d)
        for part in f.parts[1:]:
            out = _series_mul(out, taylor_series(part, p, d), f.n, d)
        return out
    if f.kind == "sum":
        out: dict[Index, object] = {}
        for part in f.parts:
            for a, v in taylor_series(part, p, d).items():
                out[a] = out.get(a, 0) + v
        return out
    raise ValueError(f"no closed-form series for kind {f.kind!r}")


@lru_cache(maxsize=256)
def _binomial_shift(deg: int, x, exact: bool) -> np.ndarray:
    """``B[b, a] = C(b, a) x**(b - a)`` so that ``(x + z)**b = sum_a B[b, a] z**a``."""
    dtype = object if exact else (complex if isinstance(x, complex) else float)
    b = np.zeros((deg + 1, deg + 1), dtype=dtype)
    for i in range(deg + 1):
        for a in range(i + 1):
            b[i, a] = math.comb(i, a) * x ** (i - a)
    return b


def _poly_shift(table: Mapping[Index, object], p: tuple, d: int, exact: bool) -> dict:
    n = len(p)
    if not table:
        return {}
    degs = [max(alpha[i] for alpha in table) for i in range(n)]
    complex_coeffs = any(isinstance(c, complex) for c in table.values()) or any(
        isinstance(x, complex) for x in p
    )
    dtype = object if exact else (complex if complex_coeffs else float)
    tensor = np.zeros([g + 1 for g in degs], dtype=dtype)
    for alpha, c in table.items():
        tensor[alpha] = c if exact else (complex(c) if complex_coeffs else float(c))
    for axis in range(n):
        shift = _binomial_shift(degs[axis], p[axis], exact)
        # contract the current leading axis; the new axis lands at the end
        tensor = np.tensordot(tensor, shift, axes=([0], [0]))
    out = {}
    for alpha in multi_indices(n, d):
        if all(a <= g for a, g in zip(alpha, degs)):
            v = tensor[alpha]
            if v != 0:
                out[alpha] = v
    return out


def _series_mul(a: Mapping, b: Mapping, n: int, d: int) -> dict:
    out: dict[Index, object] = {}
    for ka, va in a.items():
        da = sum(ka)
        for kb, vb in b.items():
            if da + sum(kb) > d:
                continue
            key = tuple(x + y for x, y in zip(ka, kb))
            out[key] = out.get(key, 0) + va * vb
    return out


def _series_div(num: Mapping, den: Mapping, n: int, d: int) -> dict:
    # Solve den * q = num degree by degree.
    zero = (0,) * n
    c0 = den[zero]
    q: dict[Index, object] = {}
    for alpha in multi_indices(n, d):
        acc = num.get(alpha, 0)
        for beta, cb in den.items():
            if beta == zero or any(b > a for b, a in zip(beta, alpha)):
                continue
            rest = tuple(a - b for a, b in zip(alpha, beta))
            if rest in q:
                acc = acc - cb * q[rest]
        v = _div(acc, c0) if _is_exact(acc) and _is_exact(c0) else acc / c0
        if v != 0:
            q[alpha] = v
    return q


def _series_compose(name: str, u: Mapping, n: int, d: int) -> dict:
    zero = (0,) * n
    u0 = u.get(zero, 0)
    tail = {a: v for a, v in u.items() if a != zero}
    if isinstance(u0, complex):
        s, c, e = cmath.sin(u0), cmath.cos(u0), cmath.exp(u0)
    else:
        s, c, e = math.sin(u0), math.cos(u0), math.exp(u0)
    cycle = {"sin": [s, c, -s, -c], "cos": [c, -s, -c, s], "exp": [e]}[name]
    out: dict[Index, object] = {zero: cycle[0]}
    power: dict[Index, object] = {zero: 1.0}
    for k in range(1, d + 1):
        power = _series_mul(power, tail, n, d)
        if not power:
            break
        coef = cycle[k % len(cycle)] / math.factorial(k)
        for a, v in power.items():
            out[a] = out.get(a, 0) + coef * v
    return out


@lru_cache(maxsize=None)
def central_weights(k: int) -> tuple[tuple[int, Fraction], ...]:
    """Central finite-difference weights for the k-th derivative, second-order accurate.

    Returns ``(offset, weight)`` pairs on the stencil ``-q..q`` with
    ``q = (k + 1) // 2``; the derivative is ``sum w f(x + offset h) / h**k``.
    Weights follow from the moment conditions ``sum w j**m = k! [m == k]``.
    """
    if k == 0:
        return ((0, Fraction(1)),)
    q = (k + 1) // 2
    offsets = list(range(-q, q + 1))
    size = len(offsets)
    rows = [[Fraction(j) ** m for j in offsets] + [Fraction(math.factorial(k) if m == k else 0)]
            for m in range(size)]
    # Gauss-Jordan on the Vandermonde system
    for col in range(size):
        piv = next(r for r in range(col, size) if rows[r][col] != 0)
        rows[col], rows[piv] = rows[piv], rows[col]
        inv = 1 / rows[col][col]
        rows[col] = [v * inv for v in rows[col]]
        for r in range(size):
            if r != col and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[col])]
    return tuple((j, rows[i][-1]) for i, j in enumerate(offsets) if rows[i][-1] != 0)


def _finite_difference_jet(f: FnSpec, p: tuple, d: int, h: float | None) -> Jet:
    if h is None:
        h = sys.float_info.epsilon ** (1.0 / (d + 2)) * max(1.0, max((abs(x) for x in p), default=0.0))
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    cache: dict[Index, object] = {}

    def value(offset: Index):
        if offset not in cache:
            cache[offset] = f.fn(*(x + h * j for x, j in zip(p, offset)))
        return cache[offset]

    derivs = {}
    for alpha in multi_indices(f.n, d):
        stencils = [central_weights(a) for a in alpha]
        total = 0.0
        for combo in itertools.product(*stencils):
            w = 1.0
            for _, wt in combo:
                w *= float(wt)
            total += w * value(tuple(j for j, _ in combo))
        derivs[alpha] = total / h ** sum(alpha)
    return Jet(tuple(p), d, derivs)


def jet_product(a: Jet, b: Jet) -> Jet:
    """Jet of the product by the generalized Leibniz rule.

    >>> jet_product(Jet.from_values([0, 1, 0]), Jet.from_values([0, 1, 0])).as_list()
    [0, 0, 2]
    """
    if tuple(a.base_point) != tuple(b.base_point):
        raise BasePointMismatch(f"{a.base_point} != {b.base_point}")
    order = min(a.order, b.order)
    out = {}
    for alpha in multi_indices(a.n, order):
        total = 0
        for beta in itertools.product(*(range(k + 1) for k in alpha)):
            weight = 1
            for k, j in zip(alpha, beta):
                weight *= math.comb(k, j)
            rest = tuple(k - j for k, j in zip(alpha, beta))
            total = total + weight * a.derivs[beta] * b.derivs[rest]
        out[alpha] = total
    return Jet(tuple(a.base_point), order, out)
