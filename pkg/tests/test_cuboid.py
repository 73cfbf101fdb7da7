import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kscert.cuboid import (
    FaceId,
    FaceOutOfHead,
    InvalidShapeParams,
    TailedCuboid,
    contains,
    face,
    make_SC,
    tail_sq_summable,
)
from kscert.interval import Interval


def test_make_SC_paper_mode1():
    sc = make_SC(0.172047, math.sqrt(2), 3, 6.0, 9)
    assert sc.mode(1).contains(0.2433)
    assert abs(sc.mode(1).hi - math.sqrt(2) * 0.172047) < 1e-12


def test_make_SC_tail_formula():
    sc = make_SC(1.0, 2.0, 3, 3.0, 2)
    assert sc.mode(3).contains(1.0 / 27.0)
    assert abs(sc.mode(3).hi - 1.0 / 27.0) < 1e-15


def test_make_SC_rejects_degenerate():
    with pytest.raises(InvalidShapeParams):
        make_SC(0.0, 2.0, 3, 6.0, 3)
    with pytest.raises(InvalidShapeParams):
        make_SC(1.0, 0.5, 3, 6.0, 3)
    with pytest.raises(InvalidShapeParams):
        make_SC(1.0, 2.0, 2, 6.0, 3)
    with pytest.raises(InvalidShapeParams):
        make_SC(1.0, 2.0, 3, 1.5, 3)


def test_contains_monotone_in_C():
    small = make_SC(0.1, 2.0, 3, 6.0, 4)
    big = make_SC(0.2, 2.0, 3, 6.0, 4)
    assert contains(big, small)
    assert not contains(small, big)
    assert contains(small, small)


@given(st.floats(min_value=0.01, max_value=1.0),
       st.floats(min_value=0.01, max_value=1.0))
@settings(max_examples=100)
def test_contains_monotone_property(c1, c2):
    lo, hi = sorted((c1, c2))
    assert contains(make_SC(hi, 1.5, 3, 6.0, 5), make_SC(lo, 1.5, 3, 6.0, 5))


def test_contains_tail_comparison_across_exponents():
    inner = TailedCuboid((Interval(-1, 1),), 1.0, 8.0)
    outer = TailedCuboid((Interval(-1, 1),), 1.0, 6.0)
    # inner tail decays faster and is below at the junction
    assert contains(outer, inner)
    assert not contains(inner, outer)


def test_face_pins_endpoint():
    sc = make_SC(0.5, math.sqrt(2), 3, 6.0, 4)
    f = face(sc, FaceId(1, +1))
    assert f.mode(1).lo == f.mode(1).hi == sc.mode(1).hi
    g = face(sc, FaceId(2, -1))
    assert g.mode(2).lo == g.mode(2).hi == sc.mode(2).lo
    assert contains(sc, f) and contains(sc, g)


def test_face_out_of_head():
    sc = make_SC(0.5, 2.0, 3, 6.0, 4)
    with pytest.raises(FaceOutOfHead):
        face(sc, FaceId(5, +1))


def test_face_subset_property():
    sc = make_SC(0.3, 1.2, 3, 6.0, 6)
    for k in range(1, 7):
        for s in (+1, -1):
            assert contains(sc, face(sc, FaceId(k, s)))


def test_tail_sq_summable():
    assert tail_sq_summable(make_SC(1.0, 2.0, 3, 6.0, 3))


def test_json_roundtrip():
    sc = make_SC(0.25, 1.2, 3, 6.0, 5)
    d = sc.to_json_dict()
    back = TailedCuboid.from_json_dict(d)
    assert back == sc


def test_mode_zero_and_negative_are_zero():
    sc = make_SC(0.25, 1.2, 3, 6.0, 5)
    assert sc.mode(0).lo == sc.mode(0).hi == 0.0
    assert sc.mode(-3).lo == 0.0
