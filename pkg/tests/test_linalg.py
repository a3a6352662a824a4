import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from azumaya.errors import DimensionMismatch, NonRealSpectrum, NotCommuting, SingularBasis
from azumaya.linalg import commutation_defect, joint_block_decompose, spectral_decompose
from factories import jordan, random_known_map, well_conditioned


# spectral_decompose ---------------------------------------------------------

def test_single_jordan_block():
    sd = spectral_decompose(jordan(5.0, 3))
    assert len(sd.eigenvalues) == 1
    assert sd.eigenvalues[0] == pytest.approx(5)
    assert sd.multiplicities == (3,)
    assert sd.nilpotent_indices == (3,)


def test_diagonal():
    sd = spectral_decompose(np.diag([1.0, 2.0]))
    assert [round(e.real, 12) for e in sd.eigenvalues] == [1, 2]
    assert sd.multiplicities == (1, 1)
    assert sd.nilpotent_indices == (1, 1)


def test_near_defective_pair_clusters_like_the_unperturbed_jordan_block():
    perturbed = spectral_decompose(np.array([[1, 1], [0, 1 + 1e-12]]), tol=1e-8)
    exact = spectral_decompose(np.array([[1.0, 1.0], [0.0, 1.0]]), tol=1e-8)
    assert perturbed.multiplicities == exact.multiplicities == (2,)
    assert perturbed.nilpotent_indices == exact.nilpotent_indices == (2,)
    assert perturbed.eigenvalues[0] == pytest.approx(1, abs=1e-11)


def test_basis_change_reconstructs_the_matrix():
    rng = np.random.default_rng(1)
    P = well_conditioned(rng, 5)
    m = P @ scipy.linalg.block_diag(jordan(2.0, 2), jordan(-1.0, 3)) @ np.linalg.inv(P)
    sd = spectral_decompose(m)
    assert sd.multiplicities == (3, 2)  # lexicographic: -1 before 2
    assert sd.nilpotent_indices == (3, 2)
    rebuilt = sd.basis_change @ scipy.linalg.block_diag(*sd.blocks) @ sd.basis_inverse
    assert np.allclose(rebuilt, m, atol=1e-12)


def test_ill_conditioned_basis_is_rejected(monkeypatch):
    import azumaya.linalg as la

    m = np.array([[1.0, 100.0], [0.0, 2.0]])  # eigenbasis condition number about 140
    assert spectral_decompose(m).multiplicities == (1, 1)
    monkeypatch.setattr(la, "MAX_CONDITION", 10.0)
    with pytest.raises(SingularBasis):
        spectral_decompose(m)


# joint_block_decompose ------------------------------------------------------

def test_diagonal_pair_blocks():
    dec = joint_block_decompose([np.diag([1.0, 1.0, 2.0]), np.diag([3.0, 3.0, 5.0])])
    assert dec.block_sizes == (2, 1)
    assert [tuple(round(v, 12) for v in p) for p in dec.block_points] == [(1, 3), (2, 5)]


def test_special_lagrangian_fiber_at_two():
    m1 = 2 * np.eye(3)
    m2 = np.array([[-2.0, 0, 0], [1, 1, 0], [0, 1, 2]])
    dec = joint_block_decompose([m1, m2])
    assert dec.block_sizes == (1, 1, 1)
    assert np.allclose(dec.block_points, [(2, -2), (2, 1), (2, 2)], atol=1e-12)


def test_rotation_has_non_real_spectrum():
    with pytest.raises(NonRealSpectrum):
        joint_block_decompose([np.array([[0.0, -1.0], [1.0, 0.0]])])


def test_non_commuting_pair():
    with pytest.raises(NotCommuting):
        joint_block_decompose([np.array([[0.0, 1], [0, 0]]), np.array([[0.0, 0], [1, 0]])])


def test_blocks_are_lexicographic_and_decouple():
    rng = np.random.default_rng(7)
    for _ in range(20):
        km = random_known_map(rng)
        dec = joint_block_decompose(km.amap.ms)
        assert sum(dec.block_sizes) == km.amap.r
        assert list(dec.block_points) == sorted(dec.block_points)
        assert np.allclose(sorted(dec.block_points), sorted(km.points), atol=1e-9)
        offs = dec.offsets()
        for m in km.amap.ms:
            conj = dec.basis_inverse @ m @ dec.basis_change
            mask = np.ones_like(conj, dtype=bool)
            for a, b in zip(offs, offs[1:]):
                mask[a:b, a:b] = False
            assert np.max(np.abs(conj[mask]), initial=0) < 10 * 1e-8 * max(1, np.linalg.norm(m))


# commutation_defect ----------------------------------------------------------

def test_defect_examples():
    m = np.array([[1.0, 2], [3, 4]])
    assert commutation_defect([m, m @ m]) == pytest.approx(0, abs=1e-15)
    assert commutation_defect([m, -3.5 * m]) == pytest.approx(0, abs=1e-15)
    assert commutation_defect([np.array([[0.0, 1], [0, 0]]), np.array([[0.0, 0], [1, 0]])]) == pytest.approx(
        math.sqrt(2), rel=1e-15)
    assert commutation_defect([m]) == 0


def test_defect_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        commutation_defect([np.eye(2), np.eye(3)])


# properties -----------------------------------------------------------------

@given(st.integers(0, 10_000))
def test_conjugation_covariance_of_eigenvalues(seed):
    rng = np.random.default_rng(seed)
    km = random_known_map(rng, n=1)
    m = km.amap.ms[0]
    P = well_conditioned(rng, km.amap.r)
    a = spectral_decompose(m)
    b = spectral_decompose(P @ m @ np.linalg.inv(P))
    assert a.multiplicities == b.multiplicities
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=100 * 1e-8)


@given(st.integers(0, 10_000))
def test_nilpotent_index_is_sharp(seed):
    rng = np.random.default_rng(seed)
    km = random_known_map(rng, n=1)
    sd = spectral_decompose(km.amap.ms[0])
    assert sum(sd.multiplicities) == km.amap.r
    scale = max(1.0, np.linalg.norm(km.amap.ms[0]))
    for lam, block, p, mult in zip(sd.eigenvalues, sd.blocks, sd.nilpotent_indices, sd.multiplicities):
        assert p <= mult
        nil = block - lam * np.eye(mult)
        assert np.linalg.norm(np.linalg.matrix_power(nil, p)) <= 1e-8 * scale
        if p > 1:
            assert np.linalg.norm(np.linalg.matrix_power(nil, p - 1)) > 1e-8 * scale
