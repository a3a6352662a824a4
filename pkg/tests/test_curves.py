import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from azumaya import (
    Base,
    MatrixCurveMap,
    analyze,
    branch_slopes,
    builtin_family,
    characteristic_polynomials,
    classify,
    evaluate_family,
    from_branched_cover,
)
from azumaya.curves import X, Z, graph_residual
from azumaya.errors import FiberNotAdmissible, MonodromyMismatch, OutOfRange
from azumaya.fixtures import load_fixture

y1, y2 = sympy.symbols("y1 y2")


def expr(poly):
    return sympy.expand(poly.as_expr())


# characteristic polynomials ---------------------------------------------------

def test_rank_one_characteristic_polynomial():
    g = X**3 - 2 * X + 1
    cmap = MatrixCurveMap.from_entries(Base.interval(-1, 1), [[[g]]])
    assert expr(characteristic_polynomials(cmap)[0]) == sympy.expand(y1 - g)


def test_three_line_family_characteristic_polynomial():
    cmap = evaluate_family(builtin_family("7.2.2-phi1"), 1)
    p1, p2 = characteristic_polynomials(cmap)
    assert expr(p1) == sympy.expand((y1 - X) ** 3)
    assert expr(p2) == sympy.expand((y2 + X) * (y2 - 1) * (y2 - X))


def test_jordan_block_characteristic_polynomial():
    f = X**2 - sympy.Rational(1, 3)
    m = sympy.Matrix([[f, 0, 0], [1, f, 0], [0, 1, f]])
    cmap = MatrixCurveMap.from_entries(Base.interval(-1, 1), [m])
    assert expr(characteristic_polynomials(cmap)[0]) == sympy.expand((y1 - f) ** 3)


def test_graph_residual_vanishes_on_fibers():
    cmap = load_fixture("example-5.2.6.b").curve_map()
    polys = characteristic_polynomials(cmap)
    for x in np.linspace(-1, 1, 7):
        for poly, m in zip(polys, cmap.matrices_at(x)):
            assert graph_residual(poly, m, x) < 1e-12


# branched covers ------------------------------------------------------------

def test_cover_by_disjoint_sheets_is_diagonal():
    cmap = from_branched_cover([(X, X**2), (1 - X, X)])
    assert cmap.ms[0] == sympy.diag(X, 1 - X)
    assert cmap.ms[1] == sympy.diag(X**2, X)


def test_double_cover_around_a_branch_point():
    cmap = from_branched_cover(["w"], [1, 0], "circle", variable=Z)
    assert cmap.ms[0] == sympy.Matrix([[0, Z], [1, 0]])
    assert expr(characteristic_polynomials(cmap)[0]) == sympy.expand(y1**2 - Z)
    assert (cmap.base.lo, cmap.base.hi) == (0, 1)


def test_higher_rank_bundle_on_a_sheet():
    g = X**2 + 1
    cmap = from_branched_cover([(g,)], ranks=[2])
    assert expr(characteristic_polynomials(cmap)[0]) == sympy.expand((y1 - g) ** 2)


def test_monodromy_mismatch():
    with pytest.raises(MonodromyMismatch):
        from_branched_cover(["w"], [1, 0], "interval")
    with pytest.raises(MonodromyMismatch):
        from_branched_cover(["w", "w"], [0, 0])
    with pytest.raises(MonodromyMismatch):
        from_branched_cover([(X, X), (X,)])


# families -------------------------------------------------------------------

def test_family_slices():
    spec = builtin_family("7.2.2-phi2")
    at_zero = evaluate_family(spec, 0)
    assert at_zero.ms[1] == sympy.Matrix([[0, 0, 0], [0, 0, 0], [0, 1, 0]])
    half = evaluate_family(spec, 0.5)
    assert half.ms[1][1, 1] == sympy.Rational(1, 2)
    with pytest.raises(OutOfRange):
        evaluate_family(spec, 1.5)
    with pytest.raises(KeyError):
        builtin_family("no-such-family")


# analysis -------------------------------------------------------------------

def test_three_simple_tracks():
    diag = analyze(load_fixture("example-5.2.6.a").curve_map(), grid_size=65)
    assert len(diag.tracks) == 3
    assert [t.length for t in diag.tracks] == [1, 1, 1]
    assert classify(diag).label == "all-simple"


def test_mixed_tracks():
    diag = analyze(load_fixture("example-5.2.6.b").curve_map(), grid_size=65)
    assert sorted(t.length for t in diag.tracks) == [1, 2]
    assert classify(diag).label == "mixed-simple-nilpotent"


def test_single_nilpotent_track():
    diag = analyze(load_fixture("example-5.2.6.c").curve_map(), grid_size=65)
    assert len(diag.tracks) == 1
    track = diag.tracks[0]
    assert track.length == 3
    assert all(p.axis_orders[0] == 3 for p in track.points)
    result = classify(diag)
    assert result.label == "single-nilpotent-order-2"
    assert result.nilpotent_cloud_orders == (2,)


def test_rank_one_graph():
    cmap = from_branched_cover([(X, X**2)])
    diag = analyze(cmap, grid_size=33)
    assert len(diag.tracks) == 1
    vals = diag.tracks[0].values
    assert np.allclose(vals[:, 1], vals[:, 0] ** 2, atol=1e-14)


@pytest.mark.parametrize("name, label, decomposition", [
    ("7.2.2-phi2", "single-nilpotent-order-1", "1 ⊕ filtered-2"),
    ("7.2.2-phi3", "single-nilpotent-order-1", "1 ⊕ filtered-2"),
    ("7.2.2-phi4", "single-nilpotent-order-2", "filtered-3"),
])
def test_degenerate_family_members(name, label, decomposition):
    result = classify(analyze(evaluate_family(builtin_family(name), 0), grid_size=33))
    assert result.label == label
    assert result.decomposition == decomposition


def test_coincident_lines_overlap_without_nilpotents():
    result = classify(analyze(evaluate_family(builtin_family("7.2.2-phi1"), 0), grid_size=33))
    assert result.label == "all-simple"
    assert result.overlap
    assert result.decomposition == "free rank-3"


def test_generic_member_has_meeting_tracks():
    diag = analyze(evaluate_family(builtin_family("7.2.2-phi1"), 1), grid_size=65)
    meets = sorted(e.x for e in diag.events if e.kind == "meet")
    assert meets == pytest.approx([-1, 0, 1], abs=1e-12)
    assert classify(diag).crossings


def test_non_admissible_fiber_is_reported():
    rot = MatrixCurveMap.from_entries(Base.interval(0, 1), [[[0, -1], [1, 0]]])
    with pytest.raises(FiberNotAdmissible):
        analyze(rot, grid_size=5)


def test_workers_do_not_change_the_diagram():
    cmap = load_fixture("example-5.2.6.a").curve_map()
    assert analyze(cmap, grid_size=33).to_json() == analyze(cmap, grid_size=33, workers=4).to_json()


@pytest.mark.parametrize("t", [0.25, 0.5, 1.0])
def test_branch_slopes_of_the_line_family(t):
    diag = analyze(evaluate_family(builtin_family("7.2.2-phi4"), t), grid_size=33)
    fits = branch_slopes(diag)
    slopes = sorted(f["slope"] for f in fits if f["residual"] < 1e-9)
    assert slopes == pytest.approx([-t, 0, t], abs=1e-9)


# properties -----------------------------------------------------------------

small = st.integers(-2, 2)
unimodular = [
    sympy.Matrix([[1, 0, 0], [0, 1, 0], [0, 0, 1]]),
    sympy.Matrix([[1, 1, 0], [0, 1, 0], [0, 0, 1]]),
    sympy.Matrix([[1, 0, 0], [2, 1, 0], [1, -1, 1]]),
    sympy.Matrix([[0, 1, 0], [1, 1, 1], [0, 0, 1]]),
]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(small, small, small), min_size=3, max_size=3),
       st.lists(st.tuples(small, small), min_size=3, max_size=3),
       st.sampled_from(unimodular))
def test_tracks_follow_the_known_eigenvalue_functions(c1, c2, P):
    """Conjugated diagonal maps: lengths add up to r and tracks lie on the diagonal graphs."""
    f = [a + b * X + c * X**2 for a, b, c in c1]
    g = [a + b * X for a, b in c2]
    Pinv = P.inv()
    cmap = MatrixCurveMap.from_entries(Base.interval(-1, 1),
                                       [P * sympy.diag(*f) * Pinv, P * sympy.diag(*g) * Pinv])
    diag = analyze(cmap, grid_size=17)
    fns = [sympy.lambdify(X, sympy.Matrix([fi, gi]), "numpy") for fi, gi in zip(f, g)]
    for j, x in enumerate(diag.grid):
        assert diag.lengths_at(j) == 3
        truth = [np.ravel(fn(x)).astype(float) for fn in fns]
        live = [p for t in diag.tracks for p in t.points if p.index == j]
        for p in live:
            near = sum(np.max(np.abs(np.array(p.point) - v)) < 1e-8 for v in truth)
            assert near >= 1
            together = sum(q.length for q in live if np.max(np.abs(np.subtract(q.point, p.point))) < 1e-8)
            assert together == near
