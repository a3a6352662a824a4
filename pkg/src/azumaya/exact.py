"""Exact square matrices over the Gaussian rationals Q(i).

A matrix is stored as integer numerator arrays for the real and imaginary
parts over one positive common denominator, kept in lowest terms.  Integer
object arrays multiply much faster than arrays of ``Fraction``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Number
from typing import Iterable

import numpy as np


def _to_pair(x) -> tuple[Fraction, Fraction]:
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return _to_fraction(x[0]), _to_fraction(x[1])
    if isinstance(x, complex) or (isinstance(x, Number) and not isinstance(x, (int, float, Fraction))
                                  and hasattr(x, "imag")):
        return _to_fraction(x.real), _to_fraction(x.imag)
    return _to_fraction(x), Fraction(0)


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError("entries must be finite")
        return Fraction(float(x))
    if isinstance(x, str):
        return Fraction(x)
    if hasattr(x, "p") and hasattr(x, "q"):  # sympy Rational
        return Fraction(int(x.p), int(x.q))
    raise TypeError(f"cannot convert {x!r} to an exact rational")


def _int_array(values: Iterable, r: int) -> np.ndarray:
    a = np.empty((r, r), dtype=object)
    a.flat[:] = list(values)
    return a


class QMatrix:
    """Immutable ``r x r`` matrix with Gaussian-rational entries."""

    __slots__ = ("re", "im", "den", "r", "_key")

    def __init__(self, re: np.ndarray, im: np.ndarray | None, den: int):
        self.r = re.shape[0]
        if im is not None and not any(im.flat):
            im = None
        if den < 0:
            re, im, den = -re, (None if im is None else -im), -den
        g = den
        for v in re.flat:
            if g == 1:
                break
            g = math.gcd(g, v)
        if im is not None:
            for v in im.flat:
                if g == 1:
                    break
                g = math.gcd(g, v)
        if g > 1:
            re = re // g
            im = None if im is None else im // g
            den //= g
        self.re, self.im, self.den = re, im, den
        self._key = None

    # -- construction -------------------------------------------------
    @classmethod
    def from_entries(cls, rows) -> "QMatrix":
        """Build from nested rows of ints, Fractions, floats (converted exactly), complex or ``[re, im]``."""
        if isinstance(rows, QMatrix):
            return rows
        rows = [list(row) for row in rows]
        r = len(rows)
        if r == 0 or any(len(row) != r for row in rows):
            raise ValueError("matrix must be square and nonempty")
        pairs = [_to_pair(x) for row in rows for x in row]
        den = 1
        for a, b in pairs:
            den = den * a.denominator // math.gcd(den, a.denominator)
            den = den * b.denominator // math.gcd(den, b.denominator)
        re = _int_array((a.numerator * (den // a.denominator) for a, _ in pairs), r)
        im = _int_array((b.numerator * (den // b.denominator) for _, b in pairs), r)
        return cls(re, im, den)

    @classmethod
    def zeros(cls, r: int) -> "QMatrix":
        return cls(_int_array([0] * (r * r), r), None, 1)

    @classmethod
    def identity(cls, r: int) -> "QMatrix":
        return cls(_int_array([int(i == j) for i in range(r) for j in range(r)], r), None, 1)

    @classmethod
    def unit(cls, r: int, i: int, j: int) -> "QMatrix":
        """Matrix unit ``E_ij`` (1 in row ``i``, column ``j``)."""
        return cls(_int_array([int((a, b) == (i, j)) for a in range(r) for b in range(r)], r), None, 1)

    # -- arithmetic ---------------------------------------------------
    def _aligned(self, other: "QMatrix"):
        if self.r != other.r:
            raise ValueError("matrix sizes differ")
        g = math.gcd(self.den, other.den)
        lcm = self.den // g * other.den
        return lcm // self.den, lcm // other.den, lcm

    def __add__(self, other: "QMatrix") -> "QMatrix":
        fa, fb, den = self._aligned(other)
        re = self.re * fa + other.re * fb
        im = _add_opt(_scale_opt(self.im, fa), _scale_opt(other.im, fb))
        return QMatrix(re, im, den)

    def __sub__(self, other: "QMatrix") -> "QMatrix":
        return self + (-other)

    def __neg__(self) -> "QMatrix":
        return QMatrix(-self.re, None if self.im is None else -self.im, self.den)

    def __matmul__(self, other: "QMatrix") -> "QMatrix":
        if self.r != other.r:
            raise ValueError("matrix sizes differ")
        re = self.re.dot(other.re)
        im = None
        if self.im is not None and other.im is not None:
            re = re - self.im.dot(other.im)
        if self.im is not None:
            im = self.im.dot(other.re)
        if other.im is not None:
            im = _add_opt(im, self.re.dot(other.im))
        return QMatrix(re, im, self.den * other.den)

    def scale(self, c) -> "QMatrix":
        """Multiply by a Gaussian-rational scalar."""
        a, b = _to_pair(c)
        den = self.den * a.denominator * b.denominator
        ka = a.numerator * b.denominator
        kb = b.numerator * a.denominator
        re = self.re * ka
        im = self.re * kb if kb else None
        if self.im is not None:
            re = re - self.im * kb if kb else re
            im = _add_opt(im, self.im * ka)
        return QMatrix(re, im, den)

    def __rmul__(self, c) -> "QMatrix":
        return self.scale(c)

    def commutator(self, other: "QMatrix") -> "QMatrix":
        return self @ other - other @ self

    # -- queries ------------------------------------------------------
    def is_zero(self) -> bool:
        return not any(self.re.flat) and self.im is None

    def scalar_value(self):
        """The scalar ``c`` when the matrix equals ``c * I``, else ``None``."""
        r = self.r
        d = self.re[0, 0]
        di = 0 if self.im is None else self.im[0, 0]
        for i in range(r):
            for j in range(r):
                want = d if i == j else 0
                wanti = di if i == j else 0
                if self.re[i, j] != want or (0 if self.im is None else self.im[i, j]) != wanti:
                    return None
        if di:
            return complex(Fraction(d, self.den), Fraction(di, self.den))
        return Fraction(d, self.den)

    def trace(self) -> tuple[Fraction, Fraction]:
        re = sum(self.re[i, i] for i in range(self.r))
        im = 0 if self.im is None else sum(self.im[i, i] for i in range(self.r))
        return Fraction(re, self.den), Fraction(im, self.den)

    def entry(self, i: int, j: int) -> tuple[Fraction, Fraction]:
        im = 0 if self.im is None else self.im[i, j]
        return Fraction(self.re[i, j], self.den), Fraction(im, self.den)

    def key(self) -> tuple:
        if self._key is None:
            im = () if self.im is None else tuple(self.im.flat)
            self._key = (self.r, self.den, tuple(self.re.flat), im)
        return self._key

    def __eq__(self, other) -> bool:
        return isinstance(other, QMatrix) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def to_complex(self) -> np.ndarray:
        re = np.array([float(Fraction(v, self.den)) for v in self.re.flat]).reshape(self.r, self.r)
        if self.im is None:
            return re.astype(complex)
        im = np.array([float(Fraction(v, self.den)) for v in self.im.flat]).reshape(self.r, self.r)
        return re + 1j * im

    def __repr__(self) -> str:
        rows = []
        for i in range(self.r):
            rows.append([_fmt(self.entry(i, j)) for j in range(self.r)])
        return f"QMatrix({rows})"


def _fmt(pair: tuple[Fraction, Fraction]) -> str:
    re, im = pair
    if im == 0:
        return str(re)
    return f"{re}{'+' if im >= 0 else '-'}{abs(im)}i"


def _scale_opt(a: np.ndarray | None, k: int) -> np.ndarray | None:
    return None if a is None else a * k


def _add_opt(a: np.ndarray | None, b: np.ndarray | None) -> np.ndarray | None:
    if a is None:
        return b
    if b is None:
        return a
    return a + b
