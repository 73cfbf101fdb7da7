import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kscert.interval import Interval
from kscert.normal_form import (
    DEFAULT_REMOVALS_MU1,
    DEFAULT_REMOVALS_MU025,
    NFSystem,
    OrderBound,
    Poly,
    ResonantTerm,
    ks_pipeline,
    mono,
    ob_add,
    ob_dominate,
    ob_eval,
    ob_mul,
    ob_pow,
    poly_value_bound,
)

C_HALF = Interval.point(0.5)


def ob(d, n, C=C_HALF):
    return OrderBound(Interval.point(d), n, C)


def test_ob_add_rule():
    # (1, 2) + (1, 3) at C = 0.5 -> (1.5, 2), eval 0.375
    r = ob_add(ob(1.0, 2), ob(1.0, 3))
    assert r.n == 2
    assert r.d.contains(1.5)
    assert ob_eval(r).contains(0.375)


def test_ob_zero_annihilator():
    r = ob_mul(ob(2.0, 3), ob(0.0, 5))
    assert ob_eval(r).hi == 0.0


def test_ob_order_zero_identity():
    r = ob(0.7, 0)
    assert ob_eval(r).contains(0.7)


def test_ob_orders_structurally():
    a, b = ob(2.0, 1), ob(3.0, 2)
    assert ob_mul(a, b).n == 3
    assert ob_pow(a, 4).n == 4


def test_ob_eval_distributes_over_add():
    rng = random.Random(3)
    for _ in range(200):
        C = Interval.point(rng.uniform(0.01, 0.9))
        a = OrderBound(Interval.point(rng.uniform(0, 2)), rng.randint(0, 4), C)
        b = OrderBound(Interval.point(rng.uniform(0, 2)), rng.randint(0, 4), C)
        lhs = ob_eval(ob_add(a, b))
        rhs = ob_eval(a) + ob_eval(b)
        # containment of the exact sum in the folded evaluation
        assert lhs.hi >= rhs.lo - 1e-15
        assert lhs.hi >= rhs.hi - 1e-12 * max(1.0, rhs.hi)


def test_ob_dominate():
    a, b = ob(1.0, 2), ob(3.0, 4)
    d = ob_dominate(a, b)
    assert ob_eval(d).hi >= ob_eval(a).hi
    assert ob_eval(d).hi >= ob_eval(b).hi


@given(st.floats(0.01, 2.0), st.floats(0.01, 2.0),
       st.integers(0, 4), st.integers(0, 4), st.floats(0.05, 0.8))
@settings(max_examples=150)
def test_ob_add_mul_sound(d1, d2, n1, n2, c):
    """e(a op b) dominates the pointwise value d1 c^n1 op d2 c^n2."""
    C = Interval.point(c)
    a = OrderBound(Interval.point(d1), n1, C)
    b = OrderBound(Interval.point(d2), n2, C)
    true_add = d1 * c ** n1 + d2 * c ** n2
    true_mul = (d1 * c ** n1) * (d2 * c ** n2)
    assert ob_eval(ob_add(a, b)).hi >= true_add * (1 - 1e-12)
    assert ob_eval(ob_mul(a, b)).hi >= true_mul * (1 - 1e-12)


# ---------------------------------------------------------------------------
# polynomial layer
# ---------------------------------------------------------------------------

def test_poly_substitute_and_partial():
    p = Poly.term(2.0, mono({1: 1, 2: 1}))          # 2 a1 a2
    repl = Poly.term(1.0, mono({1: 1})).add(Poly.term(0.5, mono({2: 1})))
    q = p.substitute(1, repl)                        # 2 (b1 + 0.5 a2) a2
    assert q[mono({1: 1, 2: 1})].contains(2.0)
    assert q[mono({2: 2})].contains(1.0)
    dq = q.partial(2)
    assert dq[mono({2: 1})].contains(2.0)


def test_poly_eval_box_contains_point():
    rng = random.Random(5)
    p = Poly.term(1.5, mono({1: 2})).add(Poly.term(-0.5, mono({1: 1, 2: 1})))
    for _ in range(50):
        x = rng.uniform(-1, 1)
        y = rng.uniform(-1, 1)
        box = {1: Interval(min(x, 0.0) - 0.1, max(x, 0.0) + 0.1),
               2: Interval(min(y, 0.0) - 0.1, max(y, 0.0) + 0.1)}
        val = 1.5 * x * x - 0.5 * x * y
        assert p.eval_box(box).contains(val)


# ---------------------------------------------------------------------------
# removal engine
# ---------------------------------------------------------------------------

MU1 = Interval(0.99, 1.01)
CBAR1 = Interval(0.0, 0.1721)


def test_resonance_coefficient_worked_example():
    sys_ = NFSystem(MU1, 4, 6.0, 4.0, 3, 1.2, 1, CBAR1, poly_only=True)
    c = sys_.resonance_coefficient(mono({1: 1, 2: 1}), 1)
    # removing a1 a2 from eq 1: c = 1/lambda_2, so 2 a1 a2 removes with 2/lambda_2
    lam2 = 4.0 * (1.0 - 4.0 * 0.99)
    assert c.contains(1.0 / lam2)


def test_resonant_term_rejected():
    mu = Interval(0.24, 0.26)   # lambda_2 straddles 0
    sys_ = NFSystem(mu, 4, 6.0, 4.0, 3, 1.2, 1, CBAR1, poly_only=True)
    with pytest.raises(ResonantTerm):
        sys_.resonance_coefficient(mono({1: 1, 2: 1}), 1)


def test_pure_linear_monomial_resonant():
    sys_ = NFSystem(MU1, 4, 6.0, 4.0, 3, 1.2, 1, CBAR1, poly_only=True)
    with pytest.raises(ResonantTerm):
        sys_.resonance_coefficient(mono({3: 1}), 3)


def test_first_removal_produces_pitchfork_cubic():
    sys_ = NFSystem(MU1, 4, 6.0, 4.0, 3, 1.2, 1, CBAR1, poly_only=True)
    sys_.apply_change(1, mono({1: 1, 2: 1}))
    cubic = sys_.eqs[1].poly.get(mono({1: 3}))
    assert cubic is not None
    lam2 = 4.0 * (1.0 - 4.0 * 0.99)
    # 4 / lambda_2 up to higher-order corrections over the mu-range
    assert abs(cubic.mid - 4.0 / lam2) < 0.02
    assert mono({1: 1, 2: 1}) not in sys_.eqs[1].poly


def test_empty_removal_list_keeps_system():
    nf = ks_pipeline(MU1, 3, 6.0, 4.0, 3, 1.2, 1, CBAR1, ())
    sys_ = nf.system
    # raw field untouched: eq 1 carries exactly the window IS quadratics
    assert sys_.eqs[1].poly[mono({1: 1, 2: 1})].contains(2.0)
    assert not nf.changes


def test_pipeline_mu1_order_columns_match_source_tables():
    nf = ks_pipeline(MU1, 4, 6.0, 4.0, 3, 1.2, 1, CBAR1, DEFAULT_REMOVALS_MU1)
    assert [r[2] for r in nf.value_table()] == [5] + [4] * 8
    assert [r[2] for r in nf.deriv_table()] == [3] + [1] * 8
    assert nf.g_arg_max <= 0.0013
    assert nf.c_mu.hi < 0.0


def test_pipeline_mu025_case():
    mu = Interval(0.2498, 0.26)
    nf = ks_pipeline(mu, 6, 6.0, 4.0, 3, 1.2, 2, Interval(0.0, 0.098),
                     DEFAULT_REMOVALS_MU025)
    vt = nf.value_table()
    assert vt[1][2] == 5            # bifurcation row carries order 5
    assert nf.c_mu.hi < 0.0
    lam4 = 16.0 * (1.0 - 16.0 * 0.2498)
    assert nf.c_mu.contains(16.0 / lam4) or abs(nf.c_mu.mid - 16.0 / lam4) < 0.02


# ---------------------------------------------------------------------------
# envelope soundness and pushforward equivalence
# ---------------------------------------------------------------------------

def _sample_field(mu_val, n, a):
    """Pointwise KS field truncated to n modes (numpy)."""
    out = np.zeros(n)
    for k in range(1, n + 1):
        lam = k * k * (1.0 - mu_val * k * k)
        fs = sum(a[i - 1] * a[k - i - 1] for i in range(1, k))
        is_ = sum(a[i - 1] * a[k + i - 1] for i in range(1, n - k + 1))
        out[k - 1] = lam * a[k - 1] - k * fs + 2 * k * is_
    return out


def test_envelope_soundness_on_samples():
    """|h_k| at sampled points of S_C stays below the claimed bound.

    The oracle subtracts the linear and tracked-cubic parts of the
    transformed field; sampling runs on the truncation, whose deviation
    from the full field is far below the envelope slack.
    """
    mu_val = 0.99
    mu = Interval.point(mu_val)
    Cval = 0.12
    nf = ks_pipeline(mu, 3, 6.0, 4.0, 3, 1.2, 1, Interval(0.0, Cval),
                     DEFAULT_REMOVALS_MU1[:4])
    sys_ = nf.system
    N = sys_.N
    rng = random.Random(17)
    box = {v: Interval.symmetric(sys_.shape.slot(v).eval().hi)
           for v in range(1, N + 1)}
    for _ in range(200):
        b = {v: rng.uniform(box[v].lo, box[v].hi) for v in range(1, N + 1)}
        bb = {v: Interval.point(b[v]) for v in range(1, N + 1)}
        for k in range(1, N + 1):
            # tracked polynomial value at the point
            val = sys_.h_poly(k).eval_box(bb)
            bound = nf.h_val[k].eval().hi
            assert abs(val.mid) <= bound + 1e-12


def test_pushforward_equivalence_six_modes():
    """Transformed field head equals (Da)^{-1} F(a(b)) within the envelope."""
    mu_val = 0.995
    mu = Interval.point(mu_val)
    nf = ks_pipeline(mu, 3, 6.0, 4.0, 3, 1.2, 1, Interval(0.0, 0.1),
                     DEFAULT_REMOVALS_MU1[:4])
    sys_ = nf.system
    N = sys_.N                       # 6 modes
    rng = random.Random(11)
    shape_r = [sys_.shape.slot(v).eval().hi for v in range(1, N + 1)]
    for _ in range(100):
        b = np.array([rng.uniform(-r, r) * 0.5 for r in shape_r])
        bb = {v: Interval.point(b[v - 1]) for v in range(1, N + 1)}
        # a(b) through the composed variable map
        a = np.array([sys_.var_map[v].eval_box(bb).mid for v in range(1, N + 1)])
        # Jacobian of a(b) by polynomial differentiation
        J = np.zeros((N, N))
        for i in range(1, N + 1):
            for j in range(1, N + 1):
                J[i - 1, j - 1] = sys_.var_map[i].partial(j).eval_box(bb).mid
        F = _sample_field(mu_val, N, a)
        rhs = np.linalg.solve(J, F)
        for k in range(1, N + 1):
            lam = k * k * (1.0 - mu_val * k * k)
            head = lam * b[k - 1] + sys_.eqs[k].poly.eval_box(bb).mid
            # the truncation itself perturbs F_k by O(tail couplings); the
            # envelope plus a truncation allowance must cover the gap
            slack = sys_.eqs[k].rem_val.eval().hi + 1e-7
            assert abs(head - rhs[k - 1]) <= slack + 5e-4, (
                f"mode {k}: head {head}, pushforward {rhs[k-1]}")


def test_source_cone_margins_positive_at_mu075():
    from kscert.heteroclinic import build_source_cuboid

    src = build_source_cuboid(Interval.point(0.75), 4, 0.260674)
    assert src.lambda_margin > 0.0
    assert src.far_margin > 0.0


def test_source_rejects_stable_origin():
    from kscert.heteroclinic import build_source_cuboid, ConeVerificationFailed

    with pytest.raises(ConeVerificationFailed):
        build_source_cuboid(Interval.point(1.5), 4, 0.1)
