"""Connections induced on the push-forward of the fundamental module.

A connection ``d + A(x)`` on the trivial bundle over the base is projected
onto the spectral pieces of the family.  On a simple track this gives the
1-form ``e^i (e_i' + A e_i)`` in an eigenframe normalized so that its first
nonvanishing coordinate is 1.  On a track of length ``L > 1`` it gives an
``L x L`` connection matrix in a frame adapted to the kernel filtration of
the nilpotent radical, together with the part of that matrix that would move
a filtration step out of itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy

from .branches import BranchDiagram, Track
from .curves import MatrixCurveMap
from .errors import HypothesesNotMet
from .point import _GENERIC_WEIGHTS, _next_layer


@dataclass
class SimpleBranchConnection:
    track: int
    xs: np.ndarray
    coefficient: np.ndarray  # NaN where the frame degenerates
    pivot: int

    def to_json(self) -> dict:
        return {
            "track": self.track,
            "pivot": self.pivot,
            "x": [float(x) for x in self.xs],
            "coefficient": [[float(c.real), float(c.imag)] for c in self.coefficient],
        }


@dataclass
class FilteredBranchConnection:
    track: int
    xs: np.ndarray
    filtration: tuple[int, ...]
    matrices: np.ndarray  # (len(xs), L, L)
    invariance_residual: tuple[float, ...]  # per filtration step

    def to_json(self) -> dict:
        return {
            "track": self.track,
            "filtration": list(self.filtration),
            "x": [float(x) for x in self.xs],
            "invariance_residual": list(self.invariance_residual),
            "max_matrix_norm": float(np.max(np.linalg.norm(self.matrices, axis=(1, 2)))) if len(self.xs) else 0.0,
        }


@dataclass
class BranchConnection:
    simple: list[SimpleBranchConnection] = field(default_factory=list)
    filtered: list[FilteredBranchConnection] = field(default_factory=list)
    singular_locus: tuple[float, ...] = ()

    def to_json(self) -> dict:
        return {
            "singular_locus": list(self.singular_locus),
            "simple": [s.to_json() for s in self.simple],
            "filtered": [f.to_json() for f in self.filtered],
        }


def _connection_matrix(cmap: MatrixCurveMap, connection) -> Callable[[float], np.ndarray]:
    r = cmap.r
    if connection is None:
        return lambda x: np.zeros((r, r), dtype=complex)
    if isinstance(connection, sympy.MatrixBase):
        f = sympy.lambdify(cmap.variable, connection, modules="numpy")
        return lambda x: np.array(f(x), dtype=complex).reshape(r, r)
    if callable(connection):
        return lambda x: np.asarray(connection(x), dtype=complex).reshape(r, r)
    const = np.asarray(connection, dtype=complex).reshape(r, r)
    return lambda x: const


def _generic(mats) -> np.ndarray:
    return sum(w * m for w, m in zip(_GENERIC_WEIGHTS * 8, mats))


def _clean(v: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(v))
    out = v.copy()
    out[np.abs(out) <= 1e-13 * scale] = 0.0
    return out


def _eigenpair(m: np.ndarray, lam: complex, pivot: int | None):
    """Right eigenvector with ``e[pivot] = 1`` and dual row ``e^`` with ``e^ e = 1``."""
    shifted = m - lam * np.eye(m.shape[0])
    u, s, vh = np.linalg.svd(shifted)
    right = _clean(vh[-1].conj())
    left = _clean(u[:, -1].conj())
    if pivot is None:
        big = np.abs(right) > 1e-3 * np.max(np.abs(right))
        pivot = int(np.argmax(big))
    if abs(right[pivot]) <= 1e-10 * np.max(np.abs(right)):
        return None, None, pivot
    right = right / right[pivot]
    pairing = left @ right
    if abs(pairing) <= 1e-12:
        return None, None, pivot
    return right, left / pairing, pivot


def _simple_connection(cmap: MatrixCurveMap, track: Track, amat) -> SimpleBranchConnection:
    r = cmap.r
    coeffs = np.full(len(track.points), np.nan + 0j)
    mid = track.points[len(track.points) // 2]
    _, _, pivot = _eigenpair(_generic(cmap.matrices_at(mid.x)),
                             complex(np.dot(_GENERIC_WEIGHTS[: cmap.n], mid.point)), None)
    weights = np.array((_GENERIC_WEIGHTS * 8)[: cmap.n])
    for idx, p in enumerate(track.points):
        if p.shared:
            continue
        m = _generic(cmap.matrices_at(p.x))
        dm = _generic(cmap.derivatives_at(p.x))
        lam = complex(weights @ np.asarray(p.point))
        e, dual, _ = _eigenpair(m, lam, pivot)
        if e is None:
            continue
        lam = complex(dual @ m @ e)
        dlam = complex(dual @ dm @ e)
        # (m - lam) e' = -(dm - dlam) e with e'[pivot] = 0
        keep = [j for j in range(r) if j != pivot]
        rhs = -(dm - dlam * np.eye(r)) @ e
        sol, *_ = np.linalg.lstsq((m - lam * np.eye(r))[:, keep], rhs, rcond=None)
        de = np.zeros(r, dtype=complex)
        de[keep] = sol
        coeffs[idx] = dual @ (de + amat(p.x) @ e)
    return SimpleBranchConnection(track.id, track.xs, coeffs, pivot)


def _filtration_subspaces(cmap: MatrixCurveMap, x: float, target: np.ndarray, size: int, steps: int):
    """Orthonormal bases of the kernel-filtration subspaces of the block nearest ``target``."""
    amap = cmap.fiber(x)
    blocks = amap._blocks()
    dist = [float(np.sum((np.asarray(b.point) - target) ** 2)) for b in blocks]
    block = blocks[int(np.argmin(dist))]
    if block.size != size:
        return None, None, None
    bases = []
    layer = [np.eye(size, dtype=complex)]
    for j in range(1, steps + 1):
        if j == steps:
            kernel = np.eye(size, dtype=complex)
        else:
            layer = _next_layer(layer, block.nilpotents)
            stack = np.vstack(layer)
            _, s, vh = np.linalg.svd(stack)
            dim = block.filtration[j - 1]
            kernel = vh[size - dim:].conj().T
        q, _ = np.linalg.qr(block.columns @ kernel)
        bases.append(q)
    return bases, block.columns, block.rows


def _frame(bases, refs, filtration):
    cols = []
    lo = 0
    for step, hi in enumerate(filtration):
        q = bases[step]
        for v in refs[lo:hi]:
            cols.append(q @ (q.conj().T @ v))
        lo = hi
    return np.column_stack(cols)


def _filtered_connection(cmap: MatrixCurveMap, track: Track, amat, h: float) -> FilteredBranchConnection:
    own = [p for p in track.points if not p.shared]
    filt = own[0].filtration if own else track.points[0].filtration
    for p in own:
        if p.filtration != filt:
            raise HypothesesNotMet(track.id, f"filtration changes from {filt} to {p.filtration} at x={p.x:.6g}")
    size = track.length
    steps = len(filt)
    mid = own[len(own) // 2]
    bases, _, _ = _filtration_subspaces(cmap, mid.x, np.asarray(mid.point), size, steps)
    # reference vectors adapted to the filtration at the middle sample
    refs = []
    lo = 0
    for step, hi in enumerate(filt):
        q = bases[step]
        if refs:
            prev = np.column_stack(refs)
            proj = q - prev @ np.linalg.lstsq(prev, q, rcond=None)[0]
        else:
            proj = q
        u, _, _ = np.linalg.svd(proj, full_matrices=False)
        refs.extend(u[:, j] for j in range(hi - lo))
        lo = hi
    mats, xs = [], []
    for p in own:
        frames = []
        rows = None
        ok = True
        for x in (p.x - h, p.x, p.x + h):
            b, _, r_rows = _filtration_subspaces(cmap, x, np.asarray(p.point), size, steps)
            if b is None:
                ok = False
                break
            frames.append(_frame(b, refs, filt))
            if x == p.x:
                rows = r_rows
        if not ok:
            continue
        e_minus, e, e_plus = frames
        de = (e_plus - e_minus) / (2 * h)
        lhs = rows @ e
        gamma = np.linalg.solve(lhs, rows @ (de + amat(p.x) @ e))
        mats.append(gamma)
        xs.append(p.x)
    mats_arr = np.array(mats) if mats else np.zeros((0, size, size), dtype=complex)
    residual = []
    for hi in filt[:-1]:
        block = mats_arr[:, hi:, :hi] if len(mats) else np.zeros((0,))
        residual.append(float(np.max(np.abs(block))) if block.size else 0.0)
    return FilteredBranchConnection(track.id, np.array(xs), filt, mats_arr, tuple(residual))


def pushforward_connection(cmap: MatrixCurveMap, diag: BranchDiagram, connection=None,
                           h: float | None = None) -> BranchConnection:
    """Induced connection on each track of ``diag`` from ``d + A`` (``connection`` = ``A``; ``None`` means ``A = 0``).

    ``connection`` may be a constant matrix, a sympy matrix in the base
    variable, or a callable ``x -> A(x)``.
    """
    amat = _connection_matrix(cmap, connection)
    step = h if h is not None else 1e-5 * max(1.0, float(diag.grid[-1] - diag.grid[0]))
    out = BranchConnection()
    singular = set()
    for e in diag.events:
        if e.kind in ("meet", "merge"):
            singular.add(float(e.x))
    for t in diag.tracks:
        if t.length == 1:
            conn = _simple_connection(cmap, t, amat)
            out.simple.append(conn)
            for p, c in zip(t.points, conn.coefficient):
                if np.isnan(c):
                    singular.add(float(p.x))
        else:
            lengths = {p.length for p in t.points}
            if len(lengths) != 1:
                raise HypothesesNotMet(t.id, "branch multiplicity jumps inside the component")
            if any(ev.kind == "split" and ev.tracks[0] == t.id for ev in diag.events) or t.parent is not None:
                raise HypothesesNotMet(t.id, "branch multiplicity jumps inside the component")
            out.filtered.append(_filtered_connection(cmap, t, amat, step))
    out.singular_locus = tuple(sorted(singular))
    return out
