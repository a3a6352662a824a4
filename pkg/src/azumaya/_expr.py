"""Conversion between sympy expressions and :class:`FnSpec`."""

from __future__ import annotations

from fractions import Fraction

import sympy

from .jets import PRIMITIVES, FnSpec

_ALLOWED = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp, "I": sympy.I, "pi": sympy.pi}


def coordinate_symbols(n: int) -> list[sympy.Symbol]:
    return [sympy.Symbol(f"y{i + 1}", real=True) for i in range(n)]


def sympy_number(c):
    """Convert a sympy number to int/Fraction/float/complex."""
    c = sympy.sympify(c)
    if c.is_Integer:
        return int(c)
    if c.is_Rational:
        return Fraction(int(c.p), int(c.q))
    if c.is_real:
        return float(c)
    re, im = c.as_real_imag()
    re, im = sympy_number(re), sympy_number(im)
    return complex(re, im) if im != 0 else re


def _poly_table(expr, ys) -> dict:
    poly = sympy.Poly(expr, *ys)
    return {tuple(int(e) for e in monom): sympy_number(c) for monom, c in poly.terms()}


def fnspec_from_sympy(expr, ys) -> FnSpec:
    n = len(ys)
    expr = sympy.sympify(expr)
    if expr.is_polynomial(*ys):
        return FnSpec.polynomial(_poly_table(expr, ys) or {(0,) * n: 0}, n)
    num, den = sympy.fraction(sympy.together(expr))
    if num.is_polynomial(*ys) and den.is_polynomial(*ys):
        return FnSpec.rational(_poly_table(num, ys) or {(0,) * n: 0}, _poly_table(den, ys), n)
    if isinstance(expr, (sympy.sin, sympy.cos, sympy.exp)):
        arg = expr.args[0]
        if not arg.is_polynomial(*ys):
            raise ValueError(f"argument of {expr.func} must be a polynomial")
        return FnSpec.analytic(expr.func.__name__, _poly_table(arg, ys) or {(0,) * n: 0}, n)
    if isinstance(expr, sympy.Pow) and expr.exp.is_Integer and expr.exp > 0:
        return fnspec_from_sympy(expr.base, ys) ** int(expr.exp)
    if isinstance(expr, sympy.Mul):
        return FnSpec.product(*(fnspec_from_sympy(a, ys) for a in expr.args))
    if isinstance(expr, sympy.Add):
        return FnSpec.sum(*(fnspec_from_sympy(a, ys) for a in expr.args))
    raise ValueError(f"unsupported expression {expr}; allowed: polynomials, quotients, {PRIMITIVES}")


def fnspec_from_text(text: str, n: int) -> FnSpec:
    ys = coordinate_symbols(n)
    local = dict(_ALLOWED)
    local.update({str(y): y for y in ys})
    if n == 1:
        local["y"] = ys[0]
    try:
        expr = sympy.parse_expr(text, local_dict=local, global_dict={"Integer": sympy.Integer,
                                                                    "Float": sympy.Float,
                                                                    "Rational": sympy.Rational,
                                                                    "Symbol": sympy.Symbol})
    except Exception as exc:  # sympy raises a zoo of exception types
        raise ValueError(f"cannot parse expression {text!r}: {exc}") from None
    stray = expr.free_symbols - set(ys)
    if stray:
        raise ValueError(f"unknown symbols {sorted(map(str, stray))}")
    return fnspec_from_sympy(expr, ys)
