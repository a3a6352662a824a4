from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from azumaya.errors import BasePointMismatch, OrderTooHigh, PoleAtPoint
from azumaya.jets import FnSpec, Jet, extract_jet, jet_product, multi_indices


def sympy_jet(expr, symbols, point, d):
    """Derivative table by symbolic differentiation."""
    out = {}
    for alpha in multi_indices(len(symbols), d):
        e = expr
        for s, a in zip(symbols, alpha):
            e = sympy.diff(e, s, a)
        out[alpha] = e.subs(dict(zip(symbols, point)))
    return out


def test_monomial_jet_matches_symbolic_derivatives():
    y1, y2 = sympy.symbols("y1 y2")
    jet = extract_jet(FnSpec.polynomial({(2, 1): 1}), (1, 1), 2)
    oracle = sympy_jet(y1**2 * y2, [y1, y2], (1, 1), 2)
    assert {a: sympy.Integer(v) for a, v in jet.derivs.items()} == oracle
    assert [jet[(0, 0)], jet[(1, 0)], jet[(0, 1)], jet[(2, 0)], jet[(1, 1)], jet[(0, 2)]] == [1, 2, 1, 2, 2, 0]


def test_constant_jet():
    jet = extract_jet(FnSpec.constant(Fraction(7, 3), 2), (Fraction(1, 2), -1), 3)
    assert jet[(0, 0)] == Fraction(7, 3)
    assert extract_jet(FnSpec.constant(2.5, 1), (0.25,), 3).as_list() == [2.5, 0, 0, 0]
    assert all(v == 0 for a, v in jet.derivs.items() if a != (0, 0))


def test_sine_by_finite_differences():
    jet = extract_jet(FnSpec.numeric(np.sin, 1), (0.0,), 3, h=1e-3)
    assert np.allclose(jet.as_list(), [0, 1, 0, -1], atol=1e-6)


def test_sine_exact_path():
    jet = extract_jet(FnSpec.analytic("sin", {(1,): 1}), (0,), 3)
    assert np.allclose([complex(v) for v in jet.as_list()], [0, 1, 0, -1], atol=1e-15)


def test_rational_and_composite_against_sympy():
    y1, y2 = sympy.symbols("y1 y2")
    expr = sympy.exp(y1 * y2) / (1 + y1**2) + sympy.cos(y1 - 2 * y2) * y2
    f = FnSpec.parse("exp(y1*y2)/(1 + y1**2) + cos(y1 - 2*y2)*y2", 2)
    point = (Fraction(1, 3), Fraction(-1, 2))
    jet = extract_jet(f, point, 4)
    oracle = sympy_jet(expr, [y1, y2], point, 4)
    for alpha, v in oracle.items():
        assert complex(jet[alpha]) == pytest.approx(complex(v.evalf(30)), rel=1e-12, abs=1e-12)


def test_pole_and_order_cap():
    f = FnSpec.rational({(0,): 1}, {(1,): 1, (0,): -2})  # 1/(y - 2)
    with pytest.raises(PoleAtPoint):
        extract_jet(f, (2,), 1)
    with pytest.raises(OrderTooHigh):
        extract_jet(FnSpec.coordinate(0, 1), (0,), 13)
    assert extract_jet(FnSpec.coordinate(0, 1), (0,), 20, cap=20).order == 20


def test_jet_product_examples():
    y = Jet.from_values([0, 1, 0], (0,))
    assert jet_product(y, y).as_list() == [0, 0, 2]
    a = Jet.from_values([1, 1], (0,))
    b = Jet.from_values([1, -1], (0,))
    assert jet_product(a, b).as_list() == [1, 0]
    one = extract_jet(FnSpec.constant(1, 1), (0,), 2)
    c = Jet.from_values([3, -2, 5], (0,))
    assert jet_product(one, c).as_list() == c.as_list()


def test_jet_product_order_and_base_point():
    a = Jet.from_values([1, 2, 3], (0,))
    b = Jet.from_values([4, 5], (0,))
    assert jet_product(a, b).order == 1
    with pytest.raises(BasePointMismatch):
        jet_product(a, Jet.from_values([1, 2, 3], (1,)))


# properties -----------------------------------------------------------------

fractions = st.fractions(min_value=-3, max_value=3, max_denominator=7)


@st.composite
def exact_polys(draw, n=2, degree=3):
    terms = draw(st.dictionaries(
        st.tuples(*[st.integers(0, degree)] * n).filter(lambda a: sum(a) <= degree),
        fractions, min_size=1, max_size=5))
    return FnSpec.polynomial(terms, n)


@given(exact_polys(), exact_polys(), st.tuples(fractions, fractions), st.integers(0, 4))
def test_product_rule_is_exact_for_polynomials(f, g, p, d):
    assert extract_jet(f * g, p, d).derivs == jet_product(extract_jet(f, p, d), extract_jet(g, p, d)).derivs


@given(exact_polys(), exact_polys(), exact_polys(), st.tuples(fractions, fractions))
def test_jet_product_commutative_and_associative(f, g, h, p):
    a, b, c = (extract_jet(s, p, 3) for s in (f, g, h))
    assert jet_product(a, b).derivs == jet_product(b, a).derivs
    assert jet_product(jet_product(a, b), c).derivs == jet_product(a, jet_product(b, c)).derivs


@given(exact_polys(degree=4), st.tuples(fractions, fractions), st.integers(0, 2**32 - 1))
def test_taylor_polynomial_reproduces_polynomial(f, p, seed):
    jet = extract_jet(f, p, 4)
    rng = np.random.default_rng(seed)
    for y in rng.uniform(-2, 2, size=(10, 2)):
        exact = complex(f(*y))
        assert complex(jet.taylor_polynomial(tuple(y))) == pytest.approx(exact, rel=1e-12, abs=1e-12)


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_finite_difference_product_rule(u, v):
    f = FnSpec.numeric(lambda a, b: np.sin(a) * np.exp(b), 2)
    g = FnSpec.numeric(lambda a, b: np.cos(a + 2 * b), 2)
    fg = FnSpec.numeric(lambda a, b: np.sin(a) * np.exp(b) * np.cos(a + 2 * b), 2)
    p = (u, v)
    direct = extract_jet(fg, p, 2)
    via = jet_product(extract_jet(f, p, 2), extract_jet(g, p, 2))
    for alpha in direct.derivs:
        assert complex(direct[alpha]) == pytest.approx(complex(via[alpha]), abs=1e-7)
