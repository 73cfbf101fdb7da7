import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kscert.interval import (
    EMPTY,
    DivisionByZeroInterval,
    Interval,
    IntervalMatrix,
    NegativeSqrtDomain,
    NonSquare,
    SingularEnclosure,
    enclose_inverse,
    matrix_norms,
    phi1,
    phi2,
    sym_eig_upper,
)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def ivs(lo, hi):
    return Interval(min(lo, hi), max(lo, hi))


@st.composite
def intervals(draw):
    a = draw(finite)
    b = draw(finite)
    return ivs(a, b)


def test_add_exact_case():
    r = Interval(1, 2) + Interval(3, 4)
    assert r.contains(4.0) and r.contains(6.0)
    assert r.lo <= 4.0 <= 6.0 <= r.hi


def test_mul_symmetric():
    r = Interval(-1, 1) * Interval(-1, 1)
    assert r.contains_interval(Interval(-1, 1))


def test_sqrt_paper_value():
    # C(0.99) = 0.172047 arises as sqrt(0.0296); quoted to 6 significant digits
    r = Interval.point(0.0296).sqrt()
    assert f"{r.mid:.6g}" == "0.172047"
    assert r.contains(math.sqrt(0.0296))
    assert r.width < 1e-12


def test_sqrt_negative_domain():
    with pytest.raises(NegativeSqrtDomain):
        Interval(-1.0, 1.0).sqrt()


def test_div_by_zero_interval():
    with pytest.raises(DivisionByZeroInterval):
        Interval(1, 2) / Interval(-1, 1)


def test_intersect_disjoint_is_empty():
    assert Interval(0, 1).intersect(Interval(2, 3)).empty


def test_pow_int_even_straddle():
    r = Interval(-2, 1).pow_int(2)
    assert r.lo == 0.0 and r.hi >= 4.0


@given(intervals(), intervals(), st.integers(0, 99), st.integers(0, 99))
@settings(max_examples=300)
def test_containment_ops(a, b, ia, ib):
    """Point results of +,-,* lie inside interval results."""
    x = min(max(a.lo + (a.hi - a.lo) * ia / 99.0, a.lo), a.hi)
    y = min(max(b.lo + (b.hi - b.lo) * ib / 99.0, b.lo), b.hi)
    assert (a + b).contains(x + y)
    assert (a - b).contains(x - y)
    assert (a * b).contains(x * y)


@given(intervals(), intervals())
@settings(max_examples=200)
def test_monotonicity(a, b):
    """a' contains a and b' contains b implies op(a',b') contains op(a,b)."""
    ap = a.widen(1.5)
    bp = b.widen(1.5)
    assert (ap + bp).contains_interval(a + b)
    assert (ap * bp).contains_interval(a * b)
    assert (ap - bp).contains_interval(a - b)


def test_containment_bulk_random():
    """Bulk randomized containment across all scalar ops (acceptance-scale)."""
    rng = random.Random(12345)
    for _ in range(20_000):
        a = ivs(rng.uniform(-100, 100), rng.uniform(-100, 100))
        b = ivs(rng.uniform(-100, 100), rng.uniform(-100, 100))
        x = rng.uniform(a.lo, a.hi)
        y = rng.uniform(b.lo, b.hi)
        assert (a + b).contains(x + y)
        assert (a - b).contains(x - y)
        assert (a * b).contains(x * y)
        if not b.straddles_zero():
            assert (a / b).contains(x / y)
        if a.lo >= 0:
            assert a.sqrt().contains(math.sqrt(x))
        assert a.pow_int(3).contains(x ** 3)
        assert a.abs().contains(abs(x))


def test_hull_and_empty():
    assert EMPTY.hull(Interval(1, 2)).contains(1.5)
    assert (EMPTY + Interval(1, 2)).empty


def test_phi_functions_enclose():
    import mpmath

    mpmath.mp.dps = 40
    for z in [-3.0, -1e-5, 0.0, 1e-5, 0.5]:
        zi = Interval.point(z)
        if z != 0.0:
            zm = mpmath.mpf(z)
            true1 = float(mpmath.expm1(zm) / zm)
            true2 = float((mpmath.expm1(zm) - zm) / (zm * zm))
        else:
            true1, true2 = 1.0, 0.5
        assert phi1(zi).contains(true1)
        assert phi2(zi).contains(true2)


def test_gershgorin_2x2_example():
    m = IntervalMatrix.from_floats([[-5, 1], [1, -4]])
    ub = sym_eig_upper(m)
    w = np.linalg.eigvalsh(np.array([[-5.0, 1.0], [1.0, -4.0]]))
    assert ub >= w.max()
    assert -3.382 <= ub <= -3.0 + 1e-12


def test_gershgorin_identity_and_zero():
    assert sym_eig_upper(IntervalMatrix.identity(3)) == 1.0
    assert sym_eig_upper(IntervalMatrix(2, 2)) == 0.0


def test_gershgorin_nonsquare():
    with pytest.raises(NonSquare):
        sym_eig_upper(IntervalMatrix(2, 3))


def test_gershgorin_dominates_random_sym():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        a = rng.normal(size=(5, 5))
        s = (a + a.T) / 2
        m = IntervalMatrix.from_floats(s.tolist())
        assert sym_eig_upper(m) >= np.linalg.eigvalsh(s).max() - 1e-12


def test_matrix_norms_example():
    m = IntervalMatrix.from_floats([[1, -2], [3, 4]])
    n1, ninf = matrix_norms(m)
    assert n1.hi >= 6.0 and n1.hi < 6.0000001
    assert ninf.hi >= 7.0 and ninf.hi < 7.0000001


def test_matrix_norms_trivial():
    z = IntervalMatrix(3, 3)
    n1, ninf = matrix_norms(z)
    assert n1.hi == 0.0 and ninf.hi == 0.0
    e = IntervalMatrix.identity(4)
    n1, ninf = matrix_norms(e)
    assert n1.hi >= 1.0 and ninf.hi >= 1.0


def test_enclose_inverse_diag():
    m = IntervalMatrix.from_floats([[2, 0], [0, 4]])
    inv = enclose_inverse(m)
    assert inv[0, 0].contains(0.5)
    assert inv[1, 1].contains(0.25)
    assert inv[0, 1].contains(0.0)


def test_enclose_inverse_identity():
    inv = enclose_inverse(IntervalMatrix.identity(3))
    for i in range(3):
        for j in range(3):
            assert inv[i, j].contains(1.0 if i == j else 0.0)


def test_enclose_inverse_random_vs_lu():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(5, 5)) + 5 * np.eye(5)
    inv = enclose_inverse(IntervalMatrix.from_floats(a.tolist()))
    true = np.linalg.inv(a)
    for i in range(5):
        for j in range(5):
            assert inv[i, j].contains(true[i, j])


def test_enclose_inverse_times_a_contains_identity():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    am = IntervalMatrix.from_floats(a.tolist())
    prod = enclose_inverse(am) @ am
    for i in range(4):
        for j in range(4):
            assert prod[i, j].contains(1.0 if i == j else 0.0)


def test_enclose_inverse_singular():
    with pytest.raises(SingularEnclosure):
        enclose_inverse(IntervalMatrix.from_floats([[1, 1], [1, 1]]))
