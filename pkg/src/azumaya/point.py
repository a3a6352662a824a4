"""Maps from an Azumaya point to ``R^n``.

A map is given by the images ``m^i`` of the coordinate functions ``y^i``:
commuting ``r x r`` complex matrices with real spectra.  The value of the map
on any smooth ``f`` is computed block by block on the joint generalized
eigenspaces.  At the joint eigenvalue ``lam`` with nilpotent parts
``N_i = m^i - lam^i`` it is the Taylor polynomial

    sum_{|alpha| <= D}  d^alpha f(lam) / alpha!  *  N^alpha,

where ``D = min(k, n (r_l - 1))`` and ``k`` is the differentiability class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import sympy

from .errors import DimensionMismatch, DomainError, NonRealSpectrum, NotCommuting, PoleAtPoint, PoleAtSupport
from .jets import FnSpec, extract_jet, multi_indices, taylor_series
from .linalg import (
    DEFAULT_TOL,
    BlockDecomposition,
    as_matrix,
    commutation_defect,
    joint_block_decompose,
    matrix_scale,
    spectral_decompose,
)

C_INFINITY = math.inf
"""Sentinel for the class ``C^infinity``; ``min(C_INFINITY, d) == d`` for any integer ``d``."""

# Fixed irrational weights for the generic linear combination of nilpotents.
_GENERIC_WEIGHTS = (1.0, 0.6180339887498949, 0.41421356237309515, 0.7320508075688772,
                    0.2360679774997898, 0.6457513110645907, 0.3166247903554, 0.1622776601683795)


def _exact_entry(x):
    if isinstance(x, bool):
        return None
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, Fraction):
        return x
    if isinstance(x, sympy.Rational):
        return Fraction(int(x.p), int(x.q))
    return None


def _exact_matrix(m) -> tuple[tuple[Fraction, ...], ...] | None:
    if isinstance(m, np.ndarray) and m.dtype != object:
        return None
    rows = [list(row) for row in m]
    out = []
    for row in rows:
        conv = [_exact_entry(x) for x in row]
        if any(c is None for c in conv):
            return None
        out.append(tuple(conv))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class AzumayaPointMap:
    """Images ``ms[i] = m^i`` of the target coordinates, class ``k`` and tolerance.

    Build with :meth:`from_matrices`, which also records an exact rational copy
    when every entry is an ``int`` or ``Fraction``.
    """

    ms: tuple[np.ndarray, ...]
    k: float = C_INFINITY
    tol: float = DEFAULT_TOL
    exact: tuple | None = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_matrices(cls, ms: Sequence, k=C_INFINITY, tol: float = DEFAULT_TOL) -> "AzumayaPointMap":
        if len(ms) == 0:
            raise DimensionMismatch("a map needs at least one coordinate matrix")
        if tol <= 0:
            raise ValueError("tol must be positive")
        if k != C_INFINITY and (int(k) != k or k < 0):
            raise ValueError("k must be a nonnegative integer or C_INFINITY")
        arrays = tuple(as_matrix(m) for m in ms)
        if len({a.shape for a in arrays}) != 1:
            raise DimensionMismatch("coordinate matrices have different sizes")
        for a in arrays:
            a.setflags(write=False)
        exact = tuple(_exact_matrix(m) for m in ms)
        exact = None if any(e is None for e in exact) else exact
        return cls(arrays, C_INFINITY if k == C_INFINITY else int(k), float(tol), exact)

    @property
    def r(self) -> int:
        return self.ms[0].shape[0]

    @property
    def n(self) -> int:
        return len(self.ms)

    @property
    def scale(self) -> float:
        return matrix_scale(self.ms)

    def decomposition(self) -> BlockDecomposition:
        if "dec" not in self._cache:
            self._cache["dec"] = joint_block_decompose(self.ms, self.tol)
        return self._cache["dec"]

    def _blocks(self) -> list["_Block"]:
        if "blocks" not in self._cache:
            dec = self.decomposition()
            self._cache["blocks"] = [
                _Block.build(dec, l, self.tol) for l in range(len(dec.block_sizes))
            ]
        return self._cache["blocks"]


@dataclass(frozen=True)
class AdmissibilityReport:
    commutation_defect: float
    max_imag: float
    scale: float
    tol: float
    admissible: bool
    reason: str | None
    smoothness_defect: float | None = None
    """For finite ``k``: largest normalized degree-(k+1) monomial in the block
    nilpotents.  Nonzero values mean the matrices use jets beyond order ``k``."""

    def to_json(self) -> dict:
        return {
            "admissible": self.admissible,
            "reason": self.reason,
            "commutation_defect": self.commutation_defect,
            "max_imag": self.max_imag,
            "scale": self.scale,
            "tol": self.tol,
            "smoothness_defect": self.smoothness_defect,
        }


@dataclass(frozen=True)
class SupportScheme:
    points: tuple[tuple[float, ...], ...]
    lengths: tuple[int, ...]
    nilpotency_orders: tuple[tuple[int, ...], ...]
    filtration: tuple[tuple[int, ...], ...]
    radical_indices: tuple[int, ...]
    jordan_types: tuple[tuple[int, ...], ...]

    def to_json(self) -> dict:
        return {
            "points": [list(p) for p in self.points],
            "lengths": list(self.lengths),
            "nilpotency_orders": [list(o) for o in self.nilpotency_orders],
            "filtration": [list(f) for f in self.filtration],
            "radical_indices": list(self.radical_indices),
            "jordan_types": [list(j) for j in self.jordan_types],
        }


@dataclass(frozen=True)
class ModuleStructure:
    points: tuple[tuple[float, ...], ...]
    fiber_dims: tuple[int, ...]
    filtrations: tuple[tuple[int, ...], ...]
    generators: tuple[tuple[np.ndarray, ...], ...] = field(repr=False)
    summands: tuple[tuple[int, ...], ...] = ()

    def decomposition(self, l: int) -> str:
        """Readable summand list for point ``l``, e.g. ``"1 ⊕ filtered-2"``."""
        return describe_summands(self.summands[l])

    def to_json(self) -> dict:
        return {
            "points": [list(p) for p in self.points],
            "fiber_dims": list(self.fiber_dims),
            "filtrations": [list(f) for f in self.filtrations],
            "summands": [list(s) for s in self.summands],
            "decompositions": [self.decomposition(l) for l in range(len(self.points))],
            "generators": [
                [[[[z.real, z.imag] for z in row] for row in g] for g in gens]
                for gens in self.generators
            ],
        }


def describe_summands(parts: Sequence[int]) -> str:
    parts = sorted(parts)
    if all(p == 1 for p in parts):
        return f"free rank-{len(parts)}"
    return " ⊕ ".join("1" if p == 1 else f"filtered-{p}" for p in parts)


def _nullity(stack: np.ndarray, threshold: float) -> int:
    sv = np.linalg.svd(stack, compute_uv=False)
    return stack.shape[1] - int(np.sum(sv > threshold))


def _rank(m: np.ndarray, threshold: float) -> int:
    if m.size == 0:
        return 0
    return int(np.sum(np.linalg.svd(m, compute_uv=False) > threshold))


@dataclass
class _Block:
    point: tuple[float, ...]
    size: int
    nilpotents: tuple[np.ndarray, ...]
    orders: tuple[int, ...]
    filtration: tuple[int, ...]
    jordan_type: tuple[int, ...]
    columns: np.ndarray
    rows: np.ndarray
    scale: float
    _monomials: dict = field(default_factory=dict)

    @property
    def radical_index(self) -> int:
        return len(self.filtration)

    @classmethod
    def build(cls, dec: BlockDecomposition, l: int, tol: float) -> "_Block":
        size = dec.block_sizes[l]
        point = dec.block_points[l]
        eye = np.eye(size)
        nil = tuple(b - lam * eye for b, lam in zip(dec.blocks[l], point))
        scale = dec.scale
        orders = []
        for nmat in nil:
            power = np.eye(size, dtype=complex)
            p = size
            for j in range(1, size + 1):
                power = power @ nmat
                if np.linalg.norm(power) <= tol * scale**j:
                    p = j
                    break
            orders.append(p)
        # kernel filtration of the joint nilpotent radical
        filtration = []
        layer = [np.eye(size, dtype=complex)]
        for j in range(1, size + 1):
            layer = _next_layer(layer, nil)
            dim = _nullity(np.vstack(layer), tol * scale**j * math.sqrt(len(layer)))
            dim = max(dim, filtration[-1] + 1 if filtration else 1)
            filtration.append(min(dim, size))
            if filtration[-1] == size:
                break
        generic = sum(w * nmat for w, nmat in zip(_GENERIC_WEIGHTS * 8, nil))
        ranks = [size]
        power = np.eye(size, dtype=complex)
        for j in range(1, size + 1):
            power = power @ generic
            ranks.append(_rank(power, tol * scale**j))
            if ranks[-1] == 0:
                break
        ranks += [0] * (size + 2 - len(ranks))
        at_least = [ranks[j - 1] - ranks[j] for j in range(1, size + 1)]
        parts = []
        for j in range(1, size + 1):
            exactly = at_least[j - 1] - (at_least[j] if j < size else 0)
            parts += [j] * max(exactly, 0)
        if sum(parts) != size:
            parts = [1] * size if filtration == [size] else [size]
        return cls(point, size, nil, tuple(orders), tuple(filtration), tuple(sorted(parts)),
                   dec.columns(l), dec.rows(l), scale)

    def monomial_stack(self, order: int) -> np.ndarray:
        """``N^alpha`` for ``|alpha| <= order`` stacked in :func:`multi_indices` order."""
        if order not in self._monomials:
            n = len(self.nilpotents)
            table: dict = {}
            for alpha in multi_indices(n, order):
                if sum(alpha) == 0:
                    table[alpha] = np.eye(self.size, dtype=complex)
                    continue
                i = next(i for i, a in enumerate(alpha) if a)
                prev = list(alpha)
                prev[i] -= 1
                table[alpha] = self.nilpotents[i] @ table[tuple(prev)]
            self._monomials[order] = np.stack([table[a] for a in multi_indices(n, order)])
        return self._monomials[order]


def _next_layer(layer: list[np.ndarray], nil: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [nmat @ p for p in layer for nmat in nil]


def validate(amap: AzumayaPointMap) -> AdmissibilityReport:
    """Admissibility diagnostics; never raises for well-formed matrices."""
    tol = amap.tol
    scale = amap.scale
    defect = commutation_defect(amap.ms)
    max_imag = 0.0
    reason = None
    try:
        for m in amap.ms:
            data = spectral_decompose(m, tol)
            max_imag = max([max_imag] + [abs(z.imag) for z in data.eigenvalues])
    except DomainError as exc:
        reason = type(exc).__name__
    if reason is None:
        if defect > tol:
            reason = NotCommuting.__name__
        elif max_imag > tol * scale:
            reason = NonRealSpectrum.__name__
    smooth = None
    if reason is None and amap.k != C_INFINITY:
        smooth = _smoothness_defect(amap)
    return AdmissibilityReport(defect, max_imag, scale, tol, reason is None, reason, smooth)


def _smoothness_defect(amap: AzumayaPointMap) -> float:
    k = int(amap.k)
    worst = 0.0
    for block in amap._blocks():
        if k + 1 > block.size:
            continue
        layer = [np.eye(block.size, dtype=complex)]
        for _ in range(k + 1):
            layer = _next_layer(layer, block.nilpotents)
        worst = max([worst] + [float(np.linalg.norm(p)) / block.scale ** (k + 1) for p in layer])
    return worst


def support(amap: AzumayaPointMap) -> SupportScheme:
    """Support points with lengths, per-axis nilpotency orders and kernel filtration."""
    blocks = amap._blocks()
    return SupportScheme(
        points=tuple(b.point for b in blocks),
        lengths=tuple(b.size for b in blocks),
        nilpotency_orders=tuple(b.orders for b in blocks),
        filtration=tuple(b.filtration for b in blocks),
        radical_indices=tuple(b.radical_index for b in blocks),
        jordan_types=tuple(b.jordan_type for b in blocks),
    )


def truncation_order(amap: AzumayaPointMap, block_size: int) -> int:
    """``min(k, n (r_l - 1))`` for a block of size ``r_l``."""
    bound = amap.n * (block_size - 1)
    return int(min(amap.k, bound))


def evaluate(amap: AzumayaPointMap, f: FnSpec) -> np.ndarray:
    """The matrix ``phi#(f)``.

    >>> m = AzumayaPointMap.from_matrices([[[2, 0], [1, 2]]])
    >>> evaluate(m, FnSpec.polynomial({(2,): 1})).real
    array([[4., 0.],
           [4., 4.]])
    """
    if f.n != amap.n:
        raise DimensionMismatch(f"function of {f.n} variables on a map to R^{amap.n}")
    out = np.zeros((amap.r, amap.r), dtype=complex)
    for block in amap._blocks():
        # Products of radical_index or more nilpotents vanish, so the sum can stop early.
        order = min(truncation_order(amap, block.size), block.radical_index - 1)
        coeffs = _taylor_vector(f, block.point, order)
        value = np.tensordot(coeffs, block.monomial_stack(order), axes=1)
        out += block.columns @ value @ block.rows
    return out


def _taylor_vector(f: FnSpec, point: tuple[float, ...], order: int) -> np.ndarray:
    indices = multi_indices(f.n, order)
    try:
        if f.kind == "numeric":
            jet = extract_jet(f, point, order)
            fact = [math.prod(math.factorial(a) for a in alpha) for alpha in indices]
            return np.array([jet.derivs[a] / c for a, c in zip(indices, fact)], dtype=complex)
        series = taylor_series(f, point, order)
    except PoleAtPoint as exc:
        raise PoleAtSupport(f"function is singular at support point {point}: {exc}") from None
    return np.array([complex(series.get(a, 0)) for a in indices], dtype=complex)


def minimal_annihilator(amap: AzumayaPointMap, axis: int) -> sympy.Poly:
    """Monic minimal polynomial of ``m^axis`` as a polynomial in ``y{axis+1}``.

    Equal to the product over distinct eigenvalues ``lam`` of
    ``(y - lam)**p`` with ``p`` the largest nilpotency order on a block over
    ``lam``.  Exact rational maps get an exact answer over QQ.
    """
    if not 0 <= axis < amap.n:
        raise IndexError(f"axis {axis} out of range for n={amap.n}")
    y = sympy.Symbol(f"y{axis + 1}", real=True)
    if amap.exact is not None:
        # still enforce admissibility so non-admissible input fails the same way
        amap.decomposition()
        coeffs = _krylov_minimal_polynomial(amap.exact[axis])
        return sympy.Poly([sympy.Rational(c.numerator, c.denominator) for c in coeffs], y, domain="QQ")
    sup = support(amap)
    eps = amap.tol * amap.scale
    groups: list[list[float]] = []
    for point, orders in zip(sup.points, sup.nilpotency_orders):
        lam, p = point[axis], orders[axis]
        for g in groups:
            if abs(g[0] - lam) <= eps:
                g[1] = max(g[1], p)
                break
        else:
            groups.append([lam, p])
    poly = sympy.Poly(1, y, domain="RR")
    for lam, p in sorted(groups):
        poly = poly * sympy.Poly([1, -lam], y, domain="RR") ** p
    return poly


def _krylov_minimal_polynomial(m: tuple[tuple[Fraction, ...], ...]) -> list[Fraction]:
    """Coefficients (highest degree first) of the minimal polynomial, exactly."""
    r = len(m)

    def matmul(a, b):
        return [[sum((a[i][k] * b[k][j] for k in range(r)), Fraction(0)) for j in range(r)]
                for i in range(r)]

    basis: list[tuple[int, list[Fraction], list[Fraction]]] = []  # (pivot, vector, combo)
    power = [[Fraction(int(i == j)) for j in range(r)] for i in range(r)]
    for degree in range(r + 1):
        vec = [x for row in power for x in row]
        combo = [Fraction(0)] * (degree + 1)
        combo[degree] = Fraction(1)
        for pivot, bvec, bcombo in basis:
            c = vec[pivot]
            if c != 0:
                vec = [a - c * b for a, b in zip(vec, bvec)]
                combo = [a - c * b for a, b in zip(combo, bcombo + [Fraction(0)] * (len(combo) - len(bcombo)))]
        lead = next((i for i, v in enumerate(vec) if v != 0), None)
        if lead is None:
            # combo . (I, m, ..., m^degree) = 0 with combo[degree] = 1
            return list(reversed(combo))
        inv = 1 / vec[lead]
        basis.append((lead, [v * inv for v in vec], [c * inv for c in combo]))
        power = matmul(power, m)
    raise AssertionError("Cayley-Hamilton bound exceeded")


def pushforward_module(amap: AzumayaPointMap) -> ModuleStructure:
    """Fiber dimensions, filtrations and nilpotent generators at each support point."""
    blocks = amap._blocks()
    gens = []
    for b in blocks:
        gens.append(tuple(np.array(nmat) for nmat in b.nilpotents if np.linalg.norm(nmat) > amap.tol * b.scale))
    return ModuleStructure(
        points=tuple(b.point for b in blocks),
        fiber_dims=tuple(b.size for b in blocks),
        filtrations=tuple(b.filtration for b in blocks),
        generators=tuple(gens),
        summands=tuple(b.jordan_type for b in blocks),
    )


def matrix_polyval(poly: sympy.Poly, m) -> np.ndarray:
    """Substitute a square matrix into a univariate polynomial (Horner)."""
    a = as_matrix(m)
    out = np.zeros_like(a)
    eye = np.eye(a.shape[0], dtype=complex)
    for c in poly.all_coeffs():
        out = out @ a + complex(c) * eye
    return out
