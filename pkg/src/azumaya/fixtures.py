"""Built-in example documents, addressable by name from the command line."""

from __future__ import annotations

import copy

from .curves import BUILTIN_FAMILIES, from_branched_cover
from .io import MapSpecDoc, curve_map_document, document_to_json, parse_document

_POINT = {
    # J_2(1) + J_1(1) + J_2(-1), lower-triangular Jordan blocks
    "example-3.1.1": [[[1, 0, 0, 0, 0],
                       [1, 1, 0, 0, 0],
                       [0, 0, 1, 0, 0],
                       [0, 0, 0, -1, 0],
                       [0, 0, 0, 1, -1]]],
    "rotation": [[[0, -1], [1, 0]]],
}

# Generic cubics on [-1.5, 1.5]; their y1-projections cross inside the base.
_CURVES = {
    "example-5.2.6.a": [
        [["x**3 - x", 0, 0], [0, "x**2/2 - 3/10", 0], [0, 0, "-2*x**3/5 + x/5 + 1/10"]],
        [["x/2 + 1", 0, 0], [0, "-x**3/3 + 1/4", 0], [0, 0, "3*x**2/5 - 1"]],
    ],
    "example-5.2.6.b": [
        [["x**3 - x", 0, 0], [0, "x**3/4 + x/2 - 1/5", 0], [0, 1, "x**3/4 + x/2 - 1/5"]],
        [["x**2 - 1/2", 0, 0], [0, "-x**3/3 + x/4 + 1/3", 0], [0, 0, "-x**3/3 + x/4 + 1/3"]],
    ],
    "example-5.2.6.c": [
        [["x**3 - x + 1/5", 0, 0], [1, "x**3 - x + 1/5", 0], [0, 1, "x**3 - x + 1/5"]],
        [["x**2/2 - x/3", 0, 0], [0, "x**2/2 - x/3", 0], [0, 0, "x**2/2 - x/3"]],
    ],
}


def _documents() -> dict[str, dict]:
    docs: dict[str, dict] = {}
    for name, mats in _POINT.items():
        docs[name] = {"version": "1.0", "point_map": {"k": "inf", "matrices": mats}}
    for name, mats in _CURVES.items():
        docs[name] = {"version": "1.0",
                      "curve_map": {"base": {"kind": "interval", "lo": -1.5, "hi": 1.5}, "k": "inf",
                                    "entries": mats}}
    for key, spec in BUILTIN_FAMILIES.items():
        docs[f"example-{key}"] = document_to_json(curve_map_document(None, spec))
    # sheets swapped around the branch point: the cover w -> w^2 = x with f = w
    docs["circle-double-cover"] = document_to_json(
        curve_map_document(from_branched_cover(["w"], monodromy=[1, 0], base="circle")))
    return docs


FIXTURES = _documents()


def fixture_names() -> list[str]:
    return sorted(FIXTURES)


def fixture_json(name: str) -> dict:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; known: {fixture_names()}")
    return copy.deepcopy(FIXTURES[name])


def load_fixture(name: str) -> MapSpecDoc:
    return parse_document(fixture_json(name))
