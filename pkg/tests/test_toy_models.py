import numpy as np
import pytest

from kscert.interval import Interval
from kscert.toy_models import (
    DimensionMismatch,
    ToyModel,
    boxes,
    toy_field,
    toy_jacobian,
    toy_lemma_suite,
)


def pt(*xs):
    return [Interval.point(x) for x in xs]


def test_planar_origin_fixed_point():
    f = toy_field(ToyModel(2, Interval.point(0.01)), pt(0.0, 0.0))
    assert all(c.lo == c.hi == 0.0 for c in f)


def test_planar_sqrt_nu_x_component():
    nu = 0.01
    f = toy_field(ToyModel(2, Interval.point(nu)), pt(np.sqrt(nu), 0.0))
    # x(nu - x^2) = 0 and x^3 y + x y^2 = 0 at y = 0
    assert f[0].contains(0.0)
    assert f[0].width < 1e-12


def test_3d_yz_coupling():
    f = toy_field(ToyModel(3, Interval.point(0.01)), pt(0.0, 0.01, 0.01))
    assert f[0].contains(1e-4)


def test_dimension_guard():
    with pytest.raises(DimensionMismatch):
        toy_field(ToyModel(2, Interval.point(0.01)), pt(0.0, 0.0, 0.0))
    with pytest.raises(DimensionMismatch):
        ToyModel(4, Interval.point(0.01))


def test_planar_jacobian_origin():
    nu = 0.03
    j = toy_jacobian(ToyModel(2, Interval.point(nu)), pt(0.0, 0.0))
    assert j[0, 0].contains(nu)
    assert j[1, 1].contains(-1.0)
    assert j[0, 1].contains(0.0) and j[1, 0].contains(0.0)


def test_3d_jacobian_origin():
    nu = 0.02
    j = toy_jacobian(ToyModel(3, Interval.point(nu)), pt(0.0, 0.0, 0.0))
    assert j[0, 0].contains(nu)
    assert j[1, 1].contains(1.0)
    assert j[2, 2].contains(-1.0)


def test_jacobian_parity_under_x_flip():
    m = ToyModel(2, Interval.point(0.01))
    j1 = toy_jacobian(m, pt(0.3, 0.1))
    j2 = toy_jacobian(m, pt(-0.3, 0.1))
    # diagonal entries even in x, off-diagonal odd
    assert abs(j1[0, 0].mid - j2[0, 0].mid) < 1e-14
    assert abs(j1[0, 1].mid + j2[0, 1].mid) < 1e-14


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(8)
    for dim in (2, 3):
        model = ToyModel(dim, Interval.point(0.02))
        for _ in range(25):
            x = rng.uniform(-0.2, 0.2, size=dim)
            j = toy_jacobian(model, pt(*x))
            eps = 1e-7
            for col in range(dim):
                xp = x.copy()
                xp[col] += eps
                xm = x.copy()
                xm[col] -= eps
                fp = toy_field(model, pt(*xp))
                fm = toy_field(model, pt(*xm))
                for row in range(dim):
                    fd = (fp[row].mid - fm[row].mid) / (2 * eps)
                    assert abs(j[row, col].mid - fd) < 1e-6


def test_suite_passes_at_small_nu():
    r2 = toy_lemma_suite(ToyModel(2, Interval.point(0.01)), 0.01)
    assert r2["pass"], r2
    r3 = toy_lemma_suite(ToyModel(3, Interval.point(0.005)), 0.005)
    assert r3["pass"], r3
    assert "central_cones" in r3["stages"]


def test_suite_fails_at_large_nu():
    assert not toy_lemma_suite(ToyModel(2, Interval.point(0.5)), 0.5)["pass"]
    assert not toy_lemma_suite(ToyModel(3, Interval.point(0.5)), 0.5)["pass"]


def test_margins_monotone_in_nu():
    """Every passing stage margin improves as nu decreases."""
    m_small = toy_lemma_suite(ToyModel(2, Interval.point(0.005)), 0.005)
    m_big = toy_lemma_suite(ToyModel(2, Interval.point(0.02)), 0.02)
    ks = ("zero_hyperbolic", "connection_sets")
    for k in ks:
        a = m_small["stages"][k].get("margin")
        b = m_big["stages"][k].get("margin")
        # normalized by nu: relative dominance of the linear part grows
        assert a / 0.005 >= b / 0.02 - 1e-9


def test_boxes_shapes():
    bx = boxes(ToyModel(2, Interval.point(0.01)))
    assert bx["B0"][0].hi == pytest.approx(np.sqrt(0.01) / 2)
    assert bx["B+"][0].hi == pytest.approx(np.sqrt(0.02))
    bx3 = boxes(ToyModel(3, Interval.point(0.01)))
    assert bx3["B0"][1].hi == pytest.approx(0.01 ** 1.5)
