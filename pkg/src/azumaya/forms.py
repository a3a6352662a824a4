"""Differential forms on the target and the adapted-map conditions.

Forms are pulled back only along the reduced tracks of a branch diagram,
that is along the curves ``x -> lam(x)``; nilpotent structure is ignored.
Index tuples are 0-based: ``(0, 1)`` stands for ``dy1 ^ dy2``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.optimize
import sympy

from ._expr import coordinate_symbols
from .branches import BranchDiagram, Track
from .curves import MatrixCurveMap
from .errors import DimensionCondition, DomainError, FiberNotAdmissible
from .linalg import spectral_decompose

DEFAULT_FORM_TOL = 1e-8


def _sign_sort(idx: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Sign of the sorting permutation and the sorted tuple (sign 0 on repeats)."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, tuple(sorted(idx))
    sign = 1
    for i in range(len(idx)):
        for j in range(i + 1, len(idx)):
            if idx[i] > idx[j]:
                sign = -sign
    return sign, tuple(sorted(idx))


@dataclass(frozen=True, eq=False)
class PolyForm:
    """``sum_I a_I(y) dy_I`` on ``R^n`` with polynomial coefficients ``a_I``."""

    n: int
    degree: int
    terms: Mapping[tuple[int, ...], sympy.Expr]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_terms(cls, n: int, terms: Mapping, degree: int | None = None) -> "PolyForm":
        ys = coordinate_symbols(n)
        local = {str(y): y for y in ys}
        clean: dict[tuple[int, ...], sympy.Expr] = {}
        deg = degree
        for idx, coef in terms.items():
            idx = tuple(int(i) for i in (idx if isinstance(idx, (tuple, list)) else (idx,)))
            if any(not 0 <= i < n for i in idx):
                raise ValueError(f"index {idx} out of range for n={n}")
            if deg is None:
                deg = len(idx)
            if len(idx) != deg:
                raise ValueError("all terms of a form share one degree")
            sign, key = _sign_sort(idx)
            if sign == 0:
                continue
            expr = sympy.sympify(coef, locals=local) if isinstance(coef, str) else sympy.sympify(coef)
            clean[key] = sympy.expand(clean.get(key, 0) + sign * expr)
        deg = 0 if deg is None else deg
        if deg > n:
            raise ValueError(f"degree {deg} exceeds dimension {n}")
        return cls(n, deg, {k: v for k, v in sorted(clean.items()) if v != 0})

    def __add__(self, other: "PolyForm") -> "PolyForm":
        if (self.n, self.degree) != (other.n, other.degree):
            raise ValueError("forms differ in dimension or degree")
        merged = dict(self.terms)
        for k, v in other.terms.items():
            merged[k] = merged.get(k, 0) + v
        return PolyForm.from_terms(self.n, merged, self.degree)

    def scale(self, c) -> "PolyForm":
        return PolyForm.from_terms(self.n, {k: c * v for k, v in self.terms.items()}, self.degree)

    def _functions(self):
        if "f" not in self._cache:
            ys = coordinate_symbols(self.n)
            self._cache["f"] = {k: sympy.lambdify(ys, v, modules="numpy") for k, v in self.terms.items()}
        return self._cache["f"]

    def coefficients_at(self, y: Sequence[float]) -> dict[tuple[int, ...], complex]:
        return {k: complex(f(*y)) for k, f in self._functions().items()}

    def is_constant(self) -> bool:
        return all(not v.free_symbols for v in self.terms.values())

    def to_json(self) -> dict:
        return {"n": self.n, "degree": self.degree,
                "terms": [{"index": list(k), "coefficient": str(v)} for k, v in self.terms.items()]}


def coordinate_form(n: int, *indices: int) -> PolyForm:
    """``dy_{i1} ^ ... ^ dy_{ip}`` with 0-based indices."""
    return PolyForm.from_terms(n, {tuple(indices): 1}, len(indices))


def g2_form() -> PolyForm:
    """Standard associative 3-form on ``R^7``: 123 + 145 + 167 + 246 - 257 - 347 - 356."""
    table = {(1, 2, 3): 1, (1, 4, 5): 1, (1, 6, 7): 1, (2, 4, 6): 1, (2, 5, 7): -1, (3, 4, 7): -1, (3, 5, 6): -1}
    return PolyForm.from_terms(7, {tuple(i - 1 for i in k): v for k, v in table.items()}, 3)


def hodge_star(form: PolyForm) -> PolyForm:
    """Euclidean Hodge star of a constant-coefficient form."""
    if not form.is_constant():
        raise ValueError("hodge_star is implemented for constant coefficients only")
    n = form.n
    out = {}
    for idx, coef in form.terms.items():
        rest = tuple(i for i in range(n) if i not in idx)
        sign, _ = _sign_sort(idx + rest)
        out[rest] = sign * coef
    return PolyForm.from_terms(n, out, n - form.degree)


# ---------------------------------------------------------------------------
# Pullback along tracks


@dataclass
class TrackPullback:
    track: int
    xs: np.ndarray
    coefficient: np.ndarray  # coefficient of dx (degree 1), value (degree 0), zeros otherwise


def _track_segments(track: Track) -> list[list[int]]:
    """Runs of consecutive grid indices (positions into ``track.points``)."""
    runs: list[list[int]] = []
    for pos, p in enumerate(track.points):
        if runs and track.points[runs[-1][-1]].index == p.index - 1:
            runs[-1].append(pos)
        else:
            runs.append([pos])
    return runs


def track_derivatives(track: Track) -> np.ndarray:
    """``d lam / dx`` along the track by second-order finite differences."""
    xs, vals = track.xs, track.values
    out = np.zeros_like(vals)
    for run in _track_segments(track):
        if len(run) < 2:
            continue
        edge = 2 if len(run) >= 3 else 1
        out[run] = np.gradient(vals[run], xs[run], axis=0, edge_order=edge)
    return out


def pullback_to_branches(form: PolyForm, diag: BranchDiagram) -> list[TrackPullback]:
    """Pull ``form`` back along each track ``x -> lam(x)`` of a one-dimensional base."""
    if form.n != diag.n:
        raise ValueError(f"form lives on R^{form.n}, diagram maps to R^{diag.n}")
    out = []
    for t in diag.tracks:
        xs, vals = t.xs, t.values
        coef = np.zeros(len(xs), dtype=complex)
        if form.degree == 0:
            f = form.terms.get((), 0)
            g = sympy.lambdify(coordinate_symbols(form.n), f, modules="numpy")
            coef = np.array([complex(g(*v)) for v in vals])
        elif form.degree == 1 and form.terms:
            deriv = track_derivatives(t)
            funcs = form._functions()
            for (i,), f in funcs.items():
                coef += np.array([complex(f(*v)) for v in vals]) * deriv[:, i]
        out.append(TrackPullback(t.id, xs, coef))
    return out


# ---------------------------------------------------------------------------
# Checkers


@dataclass
class AdaptedReport:
    passed: bool
    residual: float
    tol: float
    components: list[dict] = field(default_factory=list)
    reason: str | None = None

    def to_json(self) -> dict:
        return {"pass": self.passed, "residual": self.residual, "tol": self.tol,
                "reason": self.reason, "components": self.components}


def _constant_runs(track: Track, zero: float) -> bool:
    vals = track.values
    for run in _track_segments(track):
        streak = 0
        for a, b in zip(run[:-1], run[1:]):
            if np.max(np.abs(vals[b] - vals[a])) <= zero:
                streak += 1
                if streak >= 2:
                    return True
            else:
                streak = 0
    return False


def check_relative_dim0(diag: BranchDiagram, tol: float = DEFAULT_FORM_TOL) -> AdaptedReport:
    """Fails when some track stays at one target point over a sub-interval."""
    zero = tol * max(1.0, diag.scale)
    bad = [t.id for t in diag.tracks if _constant_runs(t, zero)]
    comps = [{"track": t.id, "pass": t.id not in bad} for t in diag.tracks]
    return AdaptedReport(not bad, float(len(bad)), tol, comps,
                         None if not bad else f"tracks {bad} are constant over an interval")


def _relative(values: Sequence[float], scale: float) -> float:
    top = max(values, default=0.0)
    return top / max(1.0, scale)


def check_lagrangian(diag: BranchDiagram, omega: PolyForm, base_dim: int = 1, target_dim: int | None = None,
                     tol: float = DEFAULT_FORM_TOL) -> AdaptedReport:
    """Half-dimension, relative dimension 0, and vanishing pullback of ``omega``."""
    target_dim = diag.n if target_dim is None else target_dim
    if 2 * base_dim != target_dim:
        raise DimensionCondition(f"base dimension {base_dim} is not half of target dimension {target_dim}")
    rel = check_relative_dim0(diag, tol)
    pulls = pullback_to_branches(omega, diag)
    comps = [{"track": p.track, "residual": float(np.max(np.abs(p.coefficient), initial=0.0))} for p in pulls]
    residual = max((c["residual"] for c in comps), default=0.0)
    ok = rel.passed and residual < tol * max(1.0, diag.scale)
    reason = None if ok else (rel.reason or "pullback of omega does not vanish")
    return AdaptedReport(ok, residual, tol, comps, reason)


def _slag_coefficient(u: np.ndarray, v: np.ndarray, theta: float, convention: str) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    if convention == "im":
        return -s * u + c * v
    return c * u + s * v


def _fit_phase(u: np.ndarray, v: np.ndarray, convention: str) -> tuple[float, float]:
    def rms(theta):
        return math.sqrt(float(np.mean(_slag_coefficient(u, v, theta, convention) ** 2)))

    thetas = np.linspace(0.0, math.pi, 361)[:-1]
    values = [rms(th) for th in thetas]
    k = int(np.argmin(values))
    lo, mid, hi = thetas[k] - math.pi / 360, thetas[k], thetas[k] + math.pi / 360
    theta = scipy.optimize.golden(rms, brack=(lo, mid, hi), tol=1e-15)
    theta = math.remainder(theta, math.pi)  # into [-pi/2, pi/2]
    if theta <= -math.pi / 2:
        theta += math.pi
    return theta, rms(theta)


def check_slag(diag: BranchDiagram, convention: str = "im", tol: float = DEFAULT_FORM_TOL) -> AdaptedReport:
    """Fit a constant phase per track so that Im (or Re) of ``e^{-i theta} (dy1 + i dy2)`` pulls back to 0."""
    convention = convention.lower()
    if convention not in ("im", "re"):
        raise ValueError("convention must be 'im' or 're'")
    if diag.n != 2:
        raise DimensionCondition(f"special Lagrangian check needs target C^1 = R^2, got R^{diag.n}")
    comps = []
    worst = 0.0
    ok = True
    for t in diag.tracks:
        deriv = track_derivatives(t).real
        u, v = deriv[:, 0], deriv[:, 1]
        size = float(np.max(np.hypot(u, v), initial=0.0))
        if size == 0.0:
            comps.append({"track": t.id, "theta": 0.0, "residual": 0.0, "pass": True})
            continue
        theta, _ = _fit_phase(u, v, convention)
        residual = float(np.max(np.abs(_slag_coefficient(u, v, theta, convention))))
        passed = residual < tol * size
        ok &= passed
        worst = max(worst, residual / size)
        comps.append({"track": t.id, "theta": theta, "residual": residual, "pass": passed})
    return AdaptedReport(ok, worst, tol, comps, None if ok else "no constant phase fits some track")


def restrict_constant_form(form: PolyForm, vectors: np.ndarray, point: Sequence[float] | None = None) -> dict:
    """Coefficients of ``form`` restricted to the span of ``vectors`` (rows), one per increasing index subset."""
    vecs = np.atleast_2d(np.asarray(vectors, dtype=float))
    k, p = vecs.shape[0], form.degree
    coeffs = form.coefficients_at(point if point is not None else [0.0] * form.n)
    out = {}
    for sub in itertools.combinations(range(k), p):
        v = vecs[list(sub)].T  # n x p
        total = 0.0
        for idx, a in coeffs.items():
            total += a * np.linalg.det(v[list(idx), :]) if p else a
        out[sub] = complex(total)
    return out


def check_calibration_vanishing(form: PolyForm, plane=None, diag: BranchDiagram | None = None,
                                expected_base_dim: int | None = None,
                                tol: float = DEFAULT_FORM_TOL) -> AdaptedReport:
    """Vanishing of ``form`` on a plane (vectors or coordinate indices) or on the tracks of a diagram."""
    if plane is not None:
        plane = list(plane)
        if plane and np.ndim(plane[0]) == 0:
            vecs = np.zeros((len(plane), form.n))
            for row, i in enumerate(plane):
                vecs[row, int(i)] = 1.0
        else:
            vecs = np.atleast_2d(np.asarray(plane, dtype=float))
        dim = np.linalg.matrix_rank(vecs)
        if expected_base_dim is not None and dim != expected_base_dim:
            raise DimensionCondition(f"plane has dimension {dim}, expected {expected_base_dim}")
        if form.degree > dim:
            return AdaptedReport(True, 0.0, tol, [{"plane": vecs.tolist(), "coefficients": {}}], None)
        coeffs = restrict_constant_form(form, vecs)
        residual = max((abs(c) for c in coeffs.values()), default=0.0)
        comps = [{"plane": vecs.tolist(), "coefficients": {",".join(map(str, k)): v.real for k, v in coeffs.items()}}]
        ok = residual < tol
        return AdaptedReport(ok, float(residual), tol, comps, None if ok else "form does not vanish on the plane")
    if diag is None:
        raise ValueError("give either a plane or a branch diagram")
    if expected_base_dim is not None and expected_base_dim != 1:
        raise DimensionCondition(f"branch diagrams have a 1-dimensional base, expected {expected_base_dim}")
    pulls = pullback_to_branches(form, diag)
    comps = [{"track": p.track, "residual": float(np.max(np.abs(p.coefficient), initial=0.0))} for p in pulls]
    residual = max((c["residual"] for c in comps), default=0.0)
    ok = residual < tol * max(1.0, diag.scale)
    return AdaptedReport(ok, residual, tol, comps, None if ok else "pullback does not vanish")


# ---------------------------------------------------------------------------
# J-holomorphic check over a complex base


def _clusters(cmap: MatrixCurveMap, z: complex) -> list[complex]:
    mats = cmap.matrices_at(z)
    try:
        return [complex(lam) for lam in spectral_decompose(mats[0], cmap.tol).eigenvalues]
    except DomainError as exc:
        raise FiberNotAdmissible(z, type(exc).__name__) from exc


def _nearest(values: Sequence[complex], target: complex) -> complex:
    return min(values, key=lambda v: abs(v - target))


def check_J_holomorphic(cmap: MatrixCurveMap, h: float = 1e-4, grid_size: int = 9,
                        tol: float = 1e-6) -> AdaptedReport:
    """Cauchy-Riemann residual ``|d lam / d zbar|`` of every eigenvalue branch, by central differences.

    The base must be a rectangle in ``C``; the single coordinate matrix is the
    complex target coordinate.
    """
    b = cmap.base
    if b.kind != "rectangle":
        raise ValueError("check_J_holomorphic needs a rectangle base")
    if cmap.n != 1:
        raise DimensionCondition("J-holomorphic check takes one complex coordinate matrix")
    res = np.linspace(b.lo, b.hi, grid_size)
    ims = np.linspace(b.lo_im, b.hi_im, grid_size)
    worst = 0.0
    comps = []
    for a in res:
        for c in ims:
            z = complex(a, c)
            for lam in _clusters(cmap, z):
                dx = (_nearest(_clusters(cmap, z + h), lam) - _nearest(_clusters(cmap, z - h), lam)) / (2 * h)
                dy = (_nearest(_clusters(cmap, z + 1j * h), lam) - _nearest(_clusters(cmap, z - 1j * h), lam)) / (2 * h)
                cr = 0.5 * abs(dx + 1j * dy)
                worst = max(worst, cr)
    comps.append({"grid_size": grid_size, "h": h, "max_cr_residual": worst})
    ok = worst < tol
    return AdaptedReport(ok, float(worst), tol, comps, None if ok else "Cauchy-Riemann equations fail")
