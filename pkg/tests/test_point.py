from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg
import sympy
from hypothesis import given
from hypothesis import strategies as st

from azumaya import (
    AzumayaPointMap,
    FnSpec,
    builtin_family,
    evaluate,
    evaluate_family,
    minimal_annihilator,
    pushforward_module,
    support,
    validate,
)
from azumaya.errors import NonRealSpectrum, NotCommuting, PoleAtSupport
from azumaya.fixtures import load_fixture
from azumaya.point import C_INFINITY, matrix_polyval, truncation_order
from factories import jordan, matrix_polynomial, random_known_map, random_polynomial, well_conditioned


def amap(*ms, k=C_INFINITY):
    return AzumayaPointMap.from_matrices([np.asarray(m, dtype=float) for m in ms], k=k)


# validate ---------------------------------------------------------------------

def test_validate_examples():
    assert validate(amap(np.diag([1, 2]), np.diag([3, 4]))).admissible
    rep = validate(amap([[0, 1], [0, 0]], [[0, 0], [1, 0]]))
    assert not rep.admissible and rep.reason == "NotCommuting"
    rep = validate(amap([[0, -1], [1, 0]]))
    assert not rep.admissible and rep.reason == "NonRealSpectrum"
    assert rep.max_imag == pytest.approx(1)


# support ----------------------------------------------------------------------

def test_support_of_diagonal_pair():
    s = support(amap(np.diag([1, 1, 2]), np.diag([3, 3, 5])))
    assert s.points == ((1, 3), (2, 5))
    assert s.lengths == (2, 1)
    assert s.nilpotency_orders == ((1, 1), (1, 1))


def test_support_of_jordan_configuration():
    m = scipy.linalg.block_diag(jordan(1.5, 2), jordan(1.5, 1), jordan(-0.5, 2))
    s = support(amap(m))
    assert s.points == ((-0.5,), (1.5,))
    assert s.lengths == (2, 3)
    assert s.nilpotency_orders == ((2,), (2,))


def test_support_of_the_triple_point_fiber():
    fiber = evaluate_family(builtin_family("7.2.2-phi4"), 0).fiber(0.0)
    s = support(fiber)
    assert s.points == ((0.0, 0.0),)
    assert s.lengths == (3,)
    assert s.nilpotency_orders[0][1] == 3
    assert s.filtration == ((1, 2, 3),)


def test_support_propagates_errors():
    with pytest.raises(NonRealSpectrum):
        support(amap([[0, -1], [1, 0]]))
    with pytest.raises(NotCommuting):
        support(amap([[0, 1], [0, 0]], [[0, 0], [1, 0]]))


# evaluate ---------------------------------------------------------------------

def test_evaluate_examples():
    sq = FnSpec.polynomial({(2,): 1})
    assert np.allclose(evaluate(amap([[0, 0], [1, 0]]), sq), 0)
    assert np.allclose(evaluate(amap([[2, 0], [1, 2]]), sq), [[4, 0], [4, 4]])
    prod = FnSpec.polynomial({(1, 1): 1})
    assert np.allclose(evaluate(amap([[1, 0], [1, 1]], 2 * np.eye(2)), prod), [[2, 0], [2, 2]])


def test_evaluate_exponential_matches_expm():
    rng = np.random.default_rng(3)
    for _ in range(10):
        km = random_known_map(rng, n=1)
        got = evaluate(km.amap, FnSpec.analytic("exp", {(1,): 1}))
        assert np.allclose(got, scipy.linalg.expm(km.amap.ms[0]), rtol=1e-10, atol=1e-10)


def test_evaluate_rational_matches_inverse():
    m = scipy.linalg.block_diag(jordan(2.0, 3), [[-1.0]])
    f = FnSpec.rational({(0,): 1}, {(1,): 1, (0,): 3})  # 1/(y + 3)
    assert np.allclose(evaluate(amap(m), f), np.linalg.inv(m + 3 * np.eye(4)), atol=1e-13)


def test_pole_at_support():
    f = FnSpec.rational({(0,): 1}, {(1,): 1, (0,): -2})
    with pytest.raises(PoleAtSupport):
        evaluate(amap(jordan(2.0, 2)), f)


def test_c0_evaluation_is_blockwise_scalar():
    m = jordan(2.0, 2)
    f = FnSpec.polynomial({(2,): 1})
    assert np.allclose(evaluate(amap(m, k=0), f), 4 * np.eye(2))
    assert np.allclose(evaluate(amap(m, k=1), f), m @ m)


def test_truncation_order():
    km = amap(np.diag([1.0, 1, 1]), np.diag([2.0, 2, 2]), np.diag([0.0, 0, 0]))
    assert truncation_order(km, 3) == 6  # n (r - 1)
    assert truncation_order(amap(np.eye(3), k=1), 3) == 1
    assert truncation_order(amap(np.eye(3), k=0), 3) == 0


# minimal annihilator --------------------------------------------------------

def _coeffs(poly):
    return [sympy.nsimplify(c) for c in poly.all_coeffs()]


def test_minimal_annihilator_examples():
    y = sympy.Symbol("y")
    assert _coeffs(minimal_annihilator(amap(np.diag([1, 2])), 0)) == [1, -3, 2]
    m = scipy.linalg.block_diag(jordan(3.0, 2), jordan(3.0, 1))
    assert _coeffs(minimal_annihilator(amap(m), 0)) == _coeffs(sympy.Poly((y - 3) ** 2, y))
    m = scipy.linalg.block_diag(jordan(0.0, 2), jordan(0.0, 3))
    assert _coeffs(minimal_annihilator(amap(m), 0)) == [1, 0, 0, 0]


def test_minimal_annihilator_exact_for_rational_input():
    m = [[Fraction(1, 2), 0], [1, Fraction(1, 2)]]
    poly = minimal_annihilator(AzumayaPointMap.from_matrices([m]), 0)
    assert [sympy.Rational(c) for c in poly.all_coeffs()] == [1, -1, sympy.Rational(1, 4)]


def test_minimal_annihilator_on_the_example_fixture():
    poly = minimal_annihilator(load_fixture("example-3.1.1").point_map(), 0)
    y = sympy.Symbol("y")
    assert _coeffs(poly) == _coeffs(sympy.Poly((y - 1) ** 2 * (y + 1) ** 2, y))


# push-forward module ----------------------------------------------------------

def test_module_of_distinct_diagonal():
    mod = pushforward_module(amap(np.diag([1.0, 2.0, 3.0])))
    assert mod.fiber_dims == (1, 1, 1)
    assert all(np.allclose(g, 0) for gens in mod.generators for g in gens)


def test_module_of_jordan_curve_fiber():
    fiber = load_fixture("example-5.2.6.c").curve_map().fiber(0.3)
    mod = pushforward_module(fiber)
    assert mod.fiber_dims == (3,)
    assert mod.filtrations == ((1, 2, 3),)


def test_module_of_split_family_fiber():
    fiber = evaluate_family(builtin_family("7.2.2-phi2"), 0).fiber(0.7)
    mod = pushforward_module(fiber)
    assert mod.fiber_dims == (3,)
    assert mod.decomposition(0) == "1 ⊕ filtered-2"


# properties -------------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@given(seeds)
def test_coordinate_fidelity(seed):
    km = random_known_map(np.random.default_rng(seed))
    for i, m in enumerate(km.amap.ms):
        assert np.linalg.norm(evaluate(km.amap, FnSpec.coordinate(i, km.amap.n)) - m) < 1e-10


@given(seeds)
def test_evaluate_matches_direct_substitution(seed):
    rng = np.random.default_rng(seed)
    km = random_known_map(rng)
    f = random_polynomial(rng, km.amap.n)
    assert np.allclose(evaluate(km.amap, f), matrix_polynomial(f, km.amap.ms), atol=1e-9)


@given(seeds)
def test_homomorphism(seed):
    rng = np.random.default_rng(seed)
    km = random_known_map(rng)
    f, g = random_polynomial(rng, km.amap.n), random_polynomial(rng, km.amap.n)
    F, G = evaluate(km.amap, f), evaluate(km.amap, g)
    assert np.linalg.norm(evaluate(km.amap, f + g) - F - G) <= 1e-12 * max(1, np.linalg.norm(F) + np.linalg.norm(G))
    assert np.linalg.norm(evaluate(km.amap, f * g) - F @ G) <= 1e-9 * max(1, np.linalg.norm(F) * np.linalg.norm(G))


@given(seeds, st.integers(0, 3))
def test_locality_for_finite_k(seed, k):
    rng = np.random.default_rng(seed)
    km = random_known_map(rng, k=k)
    order = min(k, km.amap.r) + 1
    n = km.amap.n
    factors = []
    for pt in km.points:
        lin = {(0,) * n: -pt[0]}
        lin[(1,) + (0,) * (n - 1)] = 1.0
        factors += [FnSpec.polynomial(lin, n)] * order
    h = FnSpec.product(*factors)
    assert np.linalg.norm(evaluate(km.amap, h)) < 1e-10


@given(seeds)
def test_minimal_annihilator_kills_each_coordinate(seed):
    km = random_known_map(np.random.default_rng(seed))
    for i, m in enumerate(km.amap.ms):
        assert np.linalg.norm(matrix_polyval(minimal_annihilator(km.amap, i), m)) < 1e-10


@given(seeds)
def test_support_is_conjugation_invariant(seed):
    rng = np.random.default_rng(seed)
    km = random_known_map(rng)
    P = well_conditioned(rng, km.amap.r)
    Pinv = np.linalg.inv(P)
    other = AzumayaPointMap.from_matrices([P @ m @ Pinv for m in km.amap.ms])
    a, b = support(km.amap), support(other)
    assert a.lengths == b.lengths
    assert np.allclose(a.points, b.points, atol=100 * 1e-8)
    assert sum(a.lengths) == km.amap.r
