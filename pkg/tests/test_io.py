import json
import xml.etree.ElementTree as ET
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from azumaya import analyze
from azumaya.branches import BranchDiagram
from azumaya.curves import X
from azumaya.errors import InputError, ParseError, SchemaError, VersionUnsupported
from azumaya.fixtures import fixture_json, fixture_names, load_fixture
from azumaya.io import (
    branch_csv,
    branch_svg,
    emit_branch_csv,
    fnspec_from_json,
    fnspec_to_json,
    parse_document,
    parse_spec,
    serialize,
)
from azumaya.jets import FnSpec
from azumaya.point import C_INFINITY


def point_doc(matrices, **extra):
    body = {"k": "inf", "matrices": matrices}
    body.update(extra)
    return {"version": "1.0", "point_map": body}


# parsing --------------------------------------------------------------------

@pytest.mark.parametrize("name", fixture_names())
def test_fixture_round_trip_is_stable(name):
    doc = load_fixture(name)
    once = serialize(doc)
    twice = serialize(parse_spec(once))
    assert once == twice


def test_point_map_values():
    doc = parse_document(point_doc([[[1, "1/2"], [0, [0.5, -1]]]]))
    assert doc.k == C_INFINITY
    assert (doc.r, doc.n) == (2, 1)
    row0, row1 = doc.matrices[0]
    assert row0[1] == Fraction(1, 2)
    assert row1[1] == complex(0.5, -1)


def test_finite_truncation_order():
    doc = parse_document(point_doc([[[1]]], k=3))
    assert doc.k == 3
    assert doc.point_map().k == 3


def test_schema_error_points_at_the_bad_matrix():
    with pytest.raises(SchemaError) as info:
        parse_document(point_doc([[[1, 2], [3]]]))
    assert info.value.path == "/point_map/matrices/0"


@pytest.mark.parametrize("mutate, pointer", [
    (lambda d: d.pop("version"), "/version"),
    (lambda d: d.update(extra=1), "/extra"),
    (lambda d: d["point_map"].update(k=-1), "/point_map/k"),
    (lambda d: d["point_map"].update(k="forever"), "/point_map/k"),
    (lambda d: d["point_map"]["matrices"][0][0].__setitem__(0, "y1"), "/point_map/matrices/0/0/0"),
])
def test_schema_errors_carry_json_pointers(mutate, pointer):
    doc = point_doc([[[1, 0], [0, 1]]])
    mutate(doc)
    with pytest.raises(SchemaError) as info:
        parse_document(doc)
    assert info.value.path == pointer


def test_parse_and_version_errors():
    with pytest.raises(ParseError):
        parse_spec(b"{not json")
    with pytest.raises(ParseError):
        parse_spec(b"\xff\xfe")
    with pytest.raises(ParseError):
        parse_spec('{"version": "1.0", "point_map": {"matrices": [[[NaN]]]}}')
    with pytest.raises(VersionUnsupported):
        parse_document({"version": "2.0", "point_map": {"matrices": [[[1]]]}})


def test_curve_entries_as_coefficient_tables():
    table = {"terms": [{"x": 2, "c": 1}, {"c": "-1/3"}]}
    doc = parse_document({"version": "1.0", "curve_map": {"base": {"kind": "interval", "lo": -1, "hi": 1},
                                                          "entries": [[[table]]]}})
    assert sympy.expand(doc.entries[0][0, 0] - (X**2 - sympy.Rational(1, 3))) == 0
    fam = {"version": "1.0", "curve_map": {"base": {"kind": "interval", "lo": -1, "hi": 1},
                                           "family": {"lo": 0, "hi": 1},
                                           "entries": [[[{"terms": [{"x": 1, "t": 1, "c": 2}]}]]]}}
    assert parse_document(fam).curve_map(0.5).ms[0][0, 0] == X
    fam["curve_map"].pop("family")
    with pytest.raises(SchemaError) as info:
        parse_document(fam)
    assert info.value.path == "/curve_map/entries/0/0/0/terms/0/t"


def test_curve_documents_reject_stray_symbols():
    doc = fixture_json("example-5.2.6.c")
    doc["curve_map"]["entries"][0][0][0] = "x + q"
    with pytest.raises(SchemaError):
        parse_document(doc)


# function specs -------------------------------------------------------------

@pytest.mark.parametrize("f", [
    FnSpec.polynomial({(2, 0): 1, (0, 1): Fraction(-1, 3)}, 2),
    FnSpec.rational({(0,): 1}, {(1,): 1, (0,): 3}),
    FnSpec.analytic("exp", {(1,): 2}),
    FnSpec.sum(FnSpec.coordinate(0, 1), FnSpec.analytic("sin", {(1,): 1})),
])
def test_fnspec_round_trip(f):
    g = fnspec_from_json(json.loads(json.dumps(fnspec_to_json(f))))
    for y in (0.25, -0.5, 1.0):
        assert complex(g(y) if f.n == 1 else g(y, 2 * y)) == pytest.approx(
            complex(f(y) if f.n == 1 else f(y, 2 * y)), rel=1e-15)


# CSV and SVG ----------------------------------------------------------------

def test_empty_diagram_has_only_a_header():
    diag = BranchDiagram("empty", 0, 2, np.array([0.0, 1.0]), [], [], 1.0, 1e-8)
    assert branch_csv(diag) == "x,branch_id,y1,y2,length,order,filtration\n"


def test_csv_rows_and_byte_identity(tmp_path):
    cmap = load_fixture("example-5.2.6.a").curve_map()
    diag = analyze(cmap, grid_size=40)
    text = branch_csv(diag)
    lines = text.splitlines()
    assert len(lines) == 1 + 3 * 40
    rows = [line.split(",") for line in lines[1:]]
    keys = [(float(r[0]), int(r[1])) for r in rows]
    assert keys == sorted(keys)
    assert branch_csv(analyze(cmap, grid_size=40)) == text
    out = tmp_path / "b.csv"
    emit_branch_csv(diag, out)
    assert out.read_bytes() == text.encode()


def test_csv_values_round_trip_exactly():
    diag = analyze(load_fixture("example-5.2.6.c").curve_map(), grid_size=7)
    rows = [line.split(",") for line in branch_csv(diag).splitlines()[1:]]
    for row, p in zip(rows, diag.tracks[0].points):
        assert float(row[0]) == p.x
        assert (float(row[2]), float(row[3])) == p.point


def test_svg_is_well_formed():
    diag = analyze(load_fixture("example-5.2.6.b").curve_map(), grid_size=33)
    root = ET.fromstring(branch_svg(diag))
    assert root.tag.endswith("svg")
    assert len([e for e in root.iter() if e.tag.endswith("polyline") or e.tag.endswith("path")]) >= 2


# fuzzing --------------------------------------------------------------------

json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-5, 5) | st.floats(allow_nan=False, allow_infinity=False)
    | st.text(max_size=6),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=8), inner, max_size=4),
    max_leaves=12,
)


@settings(max_examples=200, deadline=None)
@given(json_values)
def test_random_json_is_rejected_cleanly(value):
    doc = {"version": "1.0", "point_map": value} if isinstance(value, dict) else value
    try:
        parse_document(doc)
    except InputError:
        return
    assert isinstance(value, dict) and "matrices" in value  # a well-formed point map by chance


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(fixture_names()), st.data())
def test_corrupted_fixtures_never_crash(name, data):
    raw = bytearray(json.dumps(fixture_json(name)).encode())
    for _ in range(data.draw(st.integers(1, 3))):
        pos = data.draw(st.integers(0, len(raw) - 1))
        raw[pos] = data.draw(st.integers(0, 255))
    try:
        parse_spec(bytes(raw))
    except InputError:
        pass
