"""Exact differential calculus on the matrix algebra ``M_r(C)``.

Every derivation of ``M_r(C)`` is inner, ``Theta_a(b) = [a, b]``, with ``a``
determined up to the centre; we store ``a`` trace-free.  A form of degree
``l`` is a finite sum of terms ``m_0 dm_1 ^ ... ^ dm_l``, kept in that
generator-list form.  The 1-form ``dm`` acts on derivations by

    dm(Theta_a) = [m, a],

and a term evaluates on ``(Theta_1, ..., Theta_l)`` to the antisymmetrized
ordered product ``sum_sigma sgn(sigma) m_0 dm_1(Theta_s1) ... dm_l(Theta_sl)``.
Two forms are equal when they agree on all increasing tuples drawn from a
basis of ``sl_r``.

All arithmetic is exact over the Gaussian rationals (:class:`QMatrix`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
import sympy

from .errors import DegreeMismatch, NotADerivation
from .exact import QMatrix
from .jets import FnSpec
from .point import AzumayaPointMap, evaluate

Term = tuple[QMatrix, tuple[QMatrix, ...]]


def as_qmatrix(a) -> QMatrix:
    return a if isinstance(a, QMatrix) else QMatrix.from_entries(np.asarray(a, dtype=object).tolist()
                                                                 if isinstance(a, np.ndarray) else a)


@dataclass(frozen=True, eq=False)
class Derivation:
    """Inner derivation ``b -> [a, b]`` with trace-free generator ``a``."""

    a: QMatrix

    @property
    def r(self) -> int:
        return self.a.r

    def apply(self, b):
        """``[a, b]``; exact for :class:`QMatrix` input, numeric otherwise."""
        if isinstance(b, QMatrix):
            return self.a.commutator(b)
        arr = np.asarray(b, dtype=complex)
        a = self.a.to_complex()
        return a @ arr - arr @ a

    __call__ = apply

    def bracket(self, other: "Derivation") -> "Derivation":
        """Commutator of derivations, ``[Theta_a, Theta_b] = Theta_[a,b]``."""
        return inner_derivation(self.a.commutator(other.a))

    def is_zero(self) -> bool:
        return self.a.is_zero()


def inner_derivation(a) -> Derivation:
    """The derivation ``b -> [a, b]``; ``a`` is shifted to trace zero.

    >>> inner_derivation([[1, 0], [0, 1]]).is_zero()
    True
    """
    q = as_qmatrix(a)
    re, im = q.trace()
    shift = QMatrix.identity(q.r).scale((re / q.r, im / q.r))
    return Derivation(q - shift)


def sl_basis(r: int) -> list[QMatrix]:
    """Basis of ``sl_r``: off-diagonal units, then ``E_ii - E_rr``."""
    out = [QMatrix.unit(r, i, j) for i in range(r) for j in range(r) if i != j]
    last = QMatrix.unit(r, r - 1, r - 1)
    out += [QMatrix.unit(r, i, i) - last for i in range(r - 1)]
    return out


def derivation_space_dimension(r: int) -> int:
    """Exact rank of ``ad: M_r -> End(M_r)``."""
    cols = []
    units = [QMatrix.unit(r, i, j) for i in range(r) for j in range(r)]
    for a in units:
        col = []
        for b in units:
            c = a.commutator(b)
            col.extend(int(v) for v in c.re.flat)
        cols.append(col)
    return int(sympy.Matrix(cols).rank())


# ---------------------------------------------------------------------------
# Forms


def _is_central(m: QMatrix) -> bool:
    return m.scalar_value() is not None


class DGAElement:
    """Exact element of ``M_r(C) (x) Lambda^l (sl_r)^*`` in generator-list form."""

    __slots__ = ("r", "degree", "terms")

    def __init__(self, r: int, degree: int, terms: Iterable[Term] = ()):
        self.r = r
        self.degree = degree
        merged: dict[tuple, list] = {}
        for m0, gens in terms:
            if len(gens) != degree:
                raise DegreeMismatch(f"term of degree {len(gens)} in a degree-{degree} element")
            if m0.is_zero() or any(_is_central(g) for g in gens):
                continue  # d of a central matrix vanishes
            key = tuple(g.key() for g in gens)
            if key in merged:
                merged[key][0] = merged[key][0] + m0
            else:
                merged[key] = [m0, tuple(gens)]
        self.terms: tuple[Term, ...] = tuple(
            (m0, gens) for m0, gens in merged.values() if not m0.is_zero()
        )

    @classmethod
    def zero(cls, r: int, degree: int = 0) -> "DGAElement":
        return cls(r, degree)

    @classmethod
    def scalar(cls, m) -> "DGAElement":
        """The 0-form ``m``."""
        q = as_qmatrix(m)
        return cls(q.r, 0, [(q, ())])

    @classmethod
    def monomial(cls, m0, gens: Sequence) -> "DGAElement":
        """``m0 dg_1 ^ ... ^ dg_l``."""
        q0 = as_qmatrix(m0)
        return cls(q0.r, len(gens), [(q0, tuple(as_qmatrix(g) for g in gens))])

    def __add__(self, other: "DGAElement") -> "DGAElement":
        self._check(other)
        return DGAElement(self.r, self.degree, self.terms + other.terms)

    def __neg__(self) -> "DGAElement":
        return DGAElement(self.r, self.degree, [(-m0, g) for m0, g in self.terms])

    def __sub__(self, other: "DGAElement") -> "DGAElement":
        return self + (-other)

    def scale(self, c) -> "DGAElement":
        return DGAElement(self.r, self.degree, [(m0.scale(c), g) for m0, g in self.terms])

    def left_multiply(self, m) -> "DGAElement":
        q = as_qmatrix(m)
        return DGAElement(self.r, self.degree, [(q @ m0, g) for m0, g in self.terms])

    def _check(self, other: "DGAElement") -> None:
        if self.r != other.r:
            raise ValueError("forms over different matrix sizes")
        if self.degree != other.degree:
            raise DegreeMismatch(f"degrees {self.degree} and {other.degree} differ")

    def is_zero_on_probes(self) -> bool:
        return dga_equal(self, DGAElement.zero(self.r, self.degree))

    def evaluate(self, derivations: Sequence) -> QMatrix:
        """Value on ``degree`` derivations (or their generator matrices)."""
        if len(derivations) != self.degree:
            raise DegreeMismatch(f"a degree-{self.degree} form needs {self.degree} arguments")
        gens = [d.a if isinstance(d, Derivation) else as_qmatrix(d) for d in derivations]
        total = QMatrix.zeros(self.r)
        cache: dict = {}
        for m0, terms in self.terms:
            value = _antisymmetrized(m0, terms, gens, cache)
            if value is not None:
                total = total + value
        return total

    def __repr__(self) -> str:
        return f"DGAElement(r={self.r}, degree={self.degree}, terms={len(self.terms)})"


def _antisymmetrized(m0: QMatrix, gens: Sequence[QMatrix], args: Sequence[QMatrix], cache: dict):
    """``sum_sigma sgn m0 [g_1, a_s1] ... [g_l, a_sl]`` by dynamic programming over subsets."""
    l = len(gens)
    if l == 0:
        return m0
    tables = []
    for g in gens:
        row = []
        for a in args:
            key = (g.key(), a.key())
            if key not in cache:
                c = g.commutator(a)
                cache[key] = None if c.is_zero() else c
            row.append(cache[key])
        if all(x is None for x in row):
            return None
        tables.append(row)
    layer: dict[int, QMatrix] = {0: m0}
    for j in range(l):
        nxt: dict[int, QMatrix] = {}
        for mask, acc in layer.items():
            for i in range(l):
                if mask >> i & 1 or tables[j][i] is None:
                    continue
                # inversions created by placing argument i after those in mask
                flips = bin(mask >> (i + 1)).count("1")
                prod = acc @ tables[j][i]
                if flips % 2:
                    prod = -prod
                new = mask | (1 << i)
                nxt[new] = nxt[new] + prod if new in nxt else prod
        layer = {k: v for k, v in nxt.items() if not v.is_zero()}
        if not layer:
            return None
    return layer.get((1 << l) - 1)


def dga_d(w: DGAElement) -> DGAElement:
    """``d(m0 dm1 ^ ... ^ dml) = dm0 ^ dm1 ^ ... ^ dml``."""
    one = QMatrix.identity(w.r)
    return DGAElement(w.r, w.degree + 1, [(one, (m0,) + gens) for m0, gens in w.terms])


def _right_multiply(m0: QMatrix, gens: tuple[QMatrix, ...], n: QMatrix) -> list[Term]:
    """Write ``(m0 dg_1 ... dg_l) n`` in generator-list form.

    Uses ``dg n = d(g n) - g dn`` on the last generator and recurses.
    """
    c = n.scalar_value()
    if c is not None:
        return [(m0.scale(c), gens)]
    if not gens:
        return [(m0 @ n, ())]
    head, last = gens[:-1], gens[-1]
    out: list[Term] = [(m0, head + (last @ n,))]
    for coef, g in _right_multiply(m0, head, last):
        out.append((-coef, g + (n,)))
    return out


def dga_wedge(alpha: DGAElement, beta: DGAElement) -> DGAElement:
    """Product ``alpha ^ beta``; degrees add."""
    if alpha.r != beta.r:
        raise ValueError("forms over different matrix sizes")
    terms: list[Term] = []
    for a0, agens in alpha.terms:
        for b0, bgens in beta.terms:
            for coef, g in _right_multiply(a0, agens, b0):
                terms.append((coef, g + bgens))
    return DGAElement(alpha.r, alpha.degree + beta.degree, terms)


def pair(theta: Derivation, alpha: DGAElement) -> QMatrix:
    """Pairing of a derivation with a 1-form: ``sum m0 [m1, a]``."""
    if alpha.degree != 1:
        raise DegreeMismatch(f"pairing needs a 1-form, got degree {alpha.degree}")
    return alpha.evaluate([theta])


def probe_tuples(r: int, degree: int) -> Iterable[tuple[QMatrix, ...]]:
    """Increasing tuples of ``sl_r`` basis elements; they span all arguments of an alternating form."""
    return itertools.combinations(sl_basis(r), degree)


def dga_equal(alpha: DGAElement, beta: DGAElement) -> bool:
    """Equality of forms, decided by evaluation on all probe tuples."""
    alpha._check(beta)
    diff = alpha - beta
    if not diff.terms:
        return True
    return all(diff.evaluate(t).is_zero() for t in probe_tuples(alpha.r, alpha.degree))


def pushforward_derivation(amap: AzumayaPointMap, theta: Derivation, f: FnSpec) -> np.ndarray:
    """``(phi_* Theta)(f) = Theta(phi#(f))``, computed numerically."""
    return theta.apply(evaluate(amap, f))


# ---------------------------------------------------------------------------
# Derivations of matrix-valued polynomial families


X = sympy.Symbol("x", real=True)


@dataclass(frozen=True)
class DerivationAction:
    """A derivation ``D`` of ``M_r(C[x])`` given on generators.

    ``on_x`` is ``D(x I)``; ``on_units[i * r + j]`` is ``D(E_ij)``.
    Entries are sympy polynomials in ``x``.
    """

    r: int
    on_x: sympy.Matrix
    on_units: tuple[sympy.Matrix, ...]
    x: sympy.Symbol = X

    @classmethod
    def from_callable(cls, action: Callable[[sympy.Matrix], sympy.Matrix], r: int,
                      x: sympy.Symbol = X) -> "DerivationAction":
        on_x = sympy.Matrix(action(x * sympy.eye(r)))
        units = []
        for i in range(r):
            for j in range(r):
                e = sympy.zeros(r, r)
                e[i, j] = 1
                units.append(sympy.Matrix(action(e)))
        return cls(r, on_x, tuple(units), x)


@dataclass(frozen=True)
class FamilyDerivation:
    """``D = nabla_{xi d/dx} + ad(a(x))`` for the trivial connection ``nabla = d``."""

    xi: sympy.Expr
    a: sympy.Matrix
    x: sympy.Symbol = X

    def apply(self, section) -> sympy.Matrix:
        s = sympy.Matrix(section)
        return (self.xi * s.diff(self.x) + self.a * s - s * self.a).applyfunc(sympy.expand)


def _max_abs_residual(m: sympy.Matrix, x: sympy.Symbol) -> float:
    worst = 0.0
    for entry in m:
        e = sympy.expand(entry)
        if e == 0:
            continue
        poly = sympy.Poly(e, x)
        worst = max(worst, max(abs(complex(c)) for c in poly.coeffs()))
    return worst


def split_derivation(action: DerivationAction, tol: float = 1e-9) -> FamilyDerivation:
    """Split ``D`` into a horizontal lift of ``xi d/dx`` and an inner part ``ad(a(x))``.

    ``xi`` is read off ``D(x I)``, which must be central.  Off-diagonal
    entries of ``a`` come from ``D(E_ii)``, differences of diagonal entries
    from ``D(E_1j)``, and ``a`` is normalized to trace zero.
    """
    r, x = action.r, action.x
    on_x = sympy.Matrix(action.on_x)
    xi = sympy.expand(on_x.trace() / r)
    if _max_abs_residual(on_x - xi * sympy.eye(r), x) > tol:
        raise NotADerivation("D(x I) is not central")

    def unit(i, j):
        return sympy.Matrix(action.on_units[i * r + j])

    a = sympy.zeros(r, r)
    for i in range(r):
        d_ii = unit(i, i)
        for k in range(r):
            if k != i:
                a[k, i] = sympy.expand(d_ii[k, i])
    diag = [sympy.Integer(0)] + [sympy.expand(-unit(0, j)[0, j]) for j in range(1, r)]
    mean = sum(diag) / r
    for i in range(r):
        a[i, i] = sympy.expand(diag[i] - mean)
    # every unit must be reproduced by the inner part
    for i in range(r):
        for j in range(r):
            e = sympy.zeros(r, r)
            e[i, j] = 1
            if _max_abs_residual(a * e - e * a - unit(i, j), x) > tol:
                raise NotADerivation(f"D(E_{i}{j}) is not [a, E_{i}{j}] for any a")
    return FamilyDerivation(xi, a, x)
