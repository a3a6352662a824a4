"""Spectral and joint generalized-eigenspace decompositions.

All routines work on dense complex matrices.  Eigenvalues are read off a
complex Schur form, grouped into clusters, the Schur form is reordered so that
every cluster is contiguous, and the coupling between clusters is removed by
solving triangular Sylvester equations.  The result is a basis in which the
input is block diagonal with one block per cluster.

Clusters are built by single-linkage merging in order of increasing distance.
Two eigenvalues closer than ``tol * scale`` always merge.  Wider groups merge
only when they look like the scatter of a single defective eigenvalue: the
polynomial with the group's roots, centred at their mean, must be ``z**c`` up
to coefficients of size ``tol * scale**k``.  Perturbing a ``p``-fold Jordan
block by ``delta`` scatters its eigenvalues over a circle of radius about
``delta**(1/p)``, but the elementary symmetric functions stay of size
``delta``.  That makes the test insensitive to the scatter.  Because no pair
of a wide scatter need pass the test on its own, each eigenvalue is also tried
together with its nearest neighbours.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import DimensionMismatch, NonRealSpectrum, NotCommuting, SingularBasis

DEFAULT_TOL = 1e-8
# Basis changes with a larger condition number are treated as singular.
MAX_CONDITION = 1e12


def as_matrix(m) -> np.ndarray:
    """Convert ``m`` to a square complex array, rejecting NaN/Inf."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionMismatch("matrix entries must be finite")
    return a


def matrix_scale(ms: Sequence[np.ndarray]) -> float:
    """``max(1, max_i ||m_i||_F)``, the scale used for all tolerances."""
    return max([1.0] + [float(np.linalg.norm(m)) for m in ms])


@dataclass(frozen=True)
class SpectralData:
    """Clustered Jordan data of a single matrix.

    ``basis_change`` holds the generalized eigenvectors, grouped by cluster in
    the order of ``eigenvalues``; ``blocks[j]`` is the matrix restricted to the
    j-th generalized eigenspace in that basis.
    """

    eigenvalues: tuple[complex, ...]
    multiplicities: tuple[int, ...]
    nilpotent_indices: tuple[int, ...]
    basis_change: np.ndarray
    basis_inverse: np.ndarray = field(repr=False)
    blocks: tuple[np.ndarray, ...] = field(repr=False)


@dataclass(frozen=True)
class BlockDecomposition:
    """Common refinement of the generalized eigenspaces of commuting matrices.

    Columns of ``basis_change`` are grouped by block, in the order of
    ``block_points``.  ``blocks[l][i]`` is the i-th input matrix restricted to
    block ``l``, expressed in that basis.
    """

    block_sizes: tuple[int, ...]
    block_points: tuple[tuple[float, ...], ...]
    basis_change: np.ndarray
    basis_inverse: np.ndarray = field(repr=False)
    blocks: tuple[tuple[np.ndarray, ...], ...] = field(repr=False)
    scale: float = 1.0

    def offsets(self) -> list[int]:
        out = [0]
        for s in self.block_sizes:
            out.append(out[-1] + s)
        return out

    def columns(self, l: int) -> np.ndarray:
        o = self.offsets()
        return self.basis_change[:, o[l] : o[l + 1]]

    def rows(self, l: int) -> np.ndarray:
        o = self.offsets()
        return self.basis_inverse[o[l] : o[l + 1], :]


def commutation_defect(ms: Sequence) -> float:
    """Largest normalized commutator norm over all pairs.

    Each pair contributes ``||[a, b]||_F / (||a||_F ||b||_F)``; pairs with a
    zero operand contribute 0.
    """
    mats = [as_matrix(m) for m in ms]
    if len({m.shape for m in mats}) > 1:
        raise DimensionMismatch("matrices have different sizes")
    worst = 0.0
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            a, b = mats[i], mats[j]
            na, nb = np.linalg.norm(a), np.linalg.norm(b)
            if na == 0.0 or nb == 0.0:
                continue
            worst = max(worst, float(np.linalg.norm(a @ b - b @ a) / (na * nb)))
    return worst


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i


def _looks_defective(values: np.ndarray, tol: float, scale: float) -> bool:
    centred = values - values.mean()
    coeffs = np.poly(centred)
    for k in range(2, len(values) + 1):
        if abs(coeffs[k]) > tol * scale**k:
            return False
    return True


def cluster_eigenvalues(w: np.ndarray, tol: float, scale: float) -> list[int]:
    """Cluster labels for eigenvalues ``w``; label 0 is the lexicographically smallest cluster."""
    n = len(w)
    uf = _UnionFind(n)
    members = {i: [i] for i in range(n)}
    pairs = sorted(
        ((abs(w[i] - w[j]), i, j) for i in range(n) for j in range(i + 1, n)),
        key=lambda t: (t[0], t[1], t[2]),
    )
    for dist, i, j in pairs:
        ri, rj = uf.find(i), uf.find(j)
        if ri == rj:
            continue
        group = members[ri] + members[rj]
        if dist <= tol * scale or _looks_defective(w[group], tol, scale):
            uf.parent[rj] = ri
            members[ri] = group
            del members[rj]
    # A p-fold scatter need not contain a defective-looking pair, so also try
    # each eigenvalue together with its nearest neighbours, largest group first.
    changed = True
    while changed and len(members) > 1:
        changed = False
        for i in range(n):
            near = sorted(range(n), key=lambda j: (abs(w[j] - w[i]), j))
            for k in range(n, 2, -1):
                if abs(w[near[k - 1]] - w[i]) > 4 * tol ** (1 / k) * scale:
                    continue  # wider than any k-fold scatter
                roots = sorted({uf.find(j) for j in near[:k]})
                if len(roots) < 2:
                    continue
                group = sorted(m for r in roots for m in members[r])
                if _looks_defective(w[group], tol, scale):
                    for r in roots[1:]:
                        uf.parent[r] = roots[0]
                        members[roots[0]] += members.pop(r)
                    changed = True
                    break
            if changed:
                break
    roots = sorted(members, key=lambda r: _complex_key(w[members[r]].mean(), tol * scale))
    order = {r: k for k, r in enumerate(roots)}
    return [order[uf.find(i)] for i in range(n)]


def _complex_key(z: complex, eps: float):
    # Rounded keys keep the ordering stable under noise well below eps.
    q = max(eps, 1e-300)
    return (round(z.real / q), round(z.imag / q), z.real, z.imag)


def _lex_compare(a: Sequence[float], b: Sequence[float], eps: float) -> int:
    for x, y in zip(a, b):
        if abs(x - y) > eps:
            return -1 if x < y else 1
    return 0


def _split(a: np.ndarray, tol: float, scale: float):
    """Block-diagonalize ``a`` along eigenvalue clusters.

    Returns ``(S, Sinv, sizes, T)`` with ``Sinv @ a @ S`` block diagonal; the
    diagonal blocks (upper triangular) are returned inside ``T``.
    """
    n = a.shape[0]
    t, z = scipy.linalg.schur(a, output="complex")
    labels = cluster_eigenvalues(np.diag(t).copy(), tol, scale)
    k = max(labels) + 1
    if k == 1:
        return np.eye(n, dtype=complex), np.eye(n, dtype=complex), [n], a.copy()
    for j in range(k - 1):
        select = np.array([1 if lab <= j else 0 for lab in labels], dtype=np.int32)
        t, z, _, _, _, _, info = lapack.ztrsen(select, t, z, job="N")
        if info != 0:
            raise SingularBasis(f"eigenvalue reordering failed (info={info})")
        labels = [lab for lab in labels if lab <= j] + [lab for lab in labels if lab > j]
    sizes = [labels.count(j) for j in range(k)]
    v = np.eye(n, dtype=complex)
    vinv = np.eye(n, dtype=complex)
    lo = 0
    for size in sizes[:-1]:
        hi = lo + size
        x, sc, info = lapack.ztrsyl(t[lo:hi, lo:hi], t[hi:, hi:], -t[lo:hi, hi:], isgn=-1)
        if info < 0 or sc == 0.0:
            raise SingularBasis("Sylvester equation for block separation is singular")
        x = x / sc
        # Apply V = [[I, X], [0, I]] on the right and its inverse on the left.
        t[lo:hi, hi:] = 0.0
        v[:, hi:] += v[:, lo:hi] @ x
        vinv[lo:hi, :] -= x @ vinv[hi:, :]
        lo = hi
    s = z @ v
    sinv = vinv @ z.conj().T
    return s, sinv, sizes, t


def _check_condition(s: np.ndarray) -> None:
    c = np.linalg.cond(s)
    if not np.isfinite(c) or c > MAX_CONDITION:
        raise SingularBasis(f"basis change condition number {c:.3g} exceeds {MAX_CONDITION:.0e}")


def _nilpotent_index(nil: np.ndarray, tol: float, scale: float) -> int:
    size = nil.shape[0]
    power = np.eye(size, dtype=complex)
    for p in range(1, size + 1):
        power = power @ nil
        if np.linalg.norm(power) <= tol * scale**p:
            return p
    return size


def spectral_decompose(m, tol: float = DEFAULT_TOL) -> SpectralData:
    """Clustered eigenvalues, multiplicities and nilpotent indices of ``m``.

    >>> d = spectral_decompose([[5, 0, 0], [1, 5, 0], [0, 1, 5]])
    >>> d.multiplicities, d.nilpotent_indices
    ((3,), (3,))
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = as_matrix(m)
    scale = matrix_scale([a])
    s, sinv, sizes, t = _split(a, tol, scale)
    _check_condition(s)
    eig, mult, idx, blocks = [], [], [], []
    lo = 0
    for size in sizes:
        hi = lo + size
        block = t[lo:hi, lo:hi] if len(sizes) > 1 else sinv @ a @ s
        lam = complex(np.trace(block) / size)
        eig.append(lam)
        mult.append(size)
        idx.append(_nilpotent_index(block - lam * np.eye(size), tol, scale))
        blocks.append(block)
        lo = hi
    return SpectralData(tuple(eig), tuple(mult), tuple(idx), s, sinv, tuple(blocks))


def joint_block_decompose(ms: Sequence, tol: float = DEFAULT_TOL) -> BlockDecomposition:
    """Simultaneous block decomposition of commuting matrices with real spectra.

    Generalized eigenspaces of the first matrix are refined by those of the
    second matrix restricted to each block, and so on.  Blocks are sorted
    lexicographically by their joint eigenvalue tuple.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    mats = [as_matrix(m) for m in ms]
    if not mats:
        raise DimensionMismatch("at least one matrix is required")
    if len({m.shape for m in mats}) > 1:
        raise DimensionMismatch("matrices have different sizes")
    defect = commutation_defect(mats)
    if defect > tol:
        raise NotCommuting(f"commutation defect {defect:.3g} exceeds tolerance {tol:.3g}")
    r = mats[0].shape[0]
    scale = matrix_scale(mats)
    parts = [(np.eye(r, dtype=complex), np.eye(r, dtype=complex))]
    for m in mats:
        refined = []
        for cols, rows in parts:
            if cols.shape[1] == 1:
                refined.append((cols, rows))
                continue
            s, sinv, sizes, _ = _split(rows @ m @ cols, tol, scale)
            if len(sizes) == 1:
                refined.append((cols, rows))
                continue
            lo = 0
            for size in sizes:
                hi = lo + size
                refined.append((cols @ s[:, lo:hi], sinv[lo:hi, :] @ rows))
                lo = hi
        parts = refined

    records = []
    for cols, rows in parts:
        size = cols.shape[1]
        restricted = tuple(rows @ m @ cols for m in mats)
        point = []
        for block in restricted:
            lam = complex(np.trace(block) / size)
            if abs(lam.imag) > tol * scale:
                raise NonRealSpectrum(
                    f"eigenvalue {lam:.6g} has imaginary part above {tol * scale:.3g}"
                )
            point.append(lam.real)
        records.append((tuple(point), cols, rows, restricted))

    eps = tol * scale
    records.sort(key=functools.cmp_to_key(lambda a, b: _lex_compare(a[0], b[0], eps)))
    basis = np.hstack([rec[1] for rec in records])
    inverse = np.vstack([rec[2] for rec in records])
    _check_condition(basis)
    return BlockDecomposition(
        block_sizes=tuple(rec[1].shape[1] for rec in records),
        block_points=tuple(rec[0] for rec in records),
        basis_change=basis,
        basis_inverse=inverse,
        blocks=tuple(rec[3] for rec in records),
        scale=scale,
    )
