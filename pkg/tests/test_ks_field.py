"""Every closed-form bound must dominate a brute-force truncated oracle.

Oracles truncate tail sums at TRUNC modes and add the rigorous S-remainder
so the comparison stays honest without infinite sums.
"""

import math
import random

import pytest

from kscert import ks_field as kf
from kscert.cuboid import TailedCuboid, make_SC
from kscert.interval import Interval

TRUNC = 220


def tail_mag(v, k):
    return v.mode_mag(k)


def truncated_S(v, l):
    """Oracle for sum_{k>=l} sup|a_k| with rigorous remainder added."""
    s = sum(tail_mag(v, k) for k in range(l, TRUNC + 1))
    # remainder sum_{k>TRUNC} C/k^s <= C/((s-1) TRUNC^{s-1})
    rem = v.tail_C / ((v.tail_s - 1.0) * TRUNC ** (v.tail_s - 1.0))
    return s, s + rem


def random_cuboid(rng, M=None, s=None):
    M = M or rng.randint(1, 8)
    s = s or rng.uniform(2.5, 8.0)
    head = tuple(Interval.symmetric(rng.uniform(0, 1.0)) for _ in range(M))
    return TailedCuboid(head, rng.uniform(0, 2.0), s)


def test_lambda_values():
    assert kf.lambda_k(Interval.point(1.0), 1).contains(0.0)
    assert kf.lambda_k(Interval.point(0.99), 1).contains(0.01)
    lam2 = kf.lambda_k(Interval.point(0.99), 2)
    assert lam2.contains(4 * (1 - 4 * 0.99))
    assert abs(lam2.mid + 11.84) < 1e-9


def test_eval_N_head_zero_cuboid():
    v = TailedCuboid((Interval.point(0.0),) * 4, 0.0, 6.0)
    for k in range(1, 9):
        r = kf.eval_N_head(v, k)
        assert r.lo == r.hi == 0.0


def test_eval_N_head_single_mode():
    c = 0.3
    head = (Interval.point(c), Interval.point(0.0), Interval.point(0.0))
    v = TailedCuboid(head, 0.0, 6.0)
    r = kf.eval_N_head(v, 2)
    assert r.contains(-2 * c * c)
    assert r.width < 1e-12


def test_eval_N_head_odd_symmetry():
    """Negating odd head modes negates N_k for odd k, preserves for even k."""
    rng = random.Random(1)
    for _ in range(50):
        M = 4
        vals = [rng.uniform(-0.5, 0.5) for _ in range(M)]
        v1 = TailedCuboid(tuple(Interval.point(x) for x in vals), 0.0, 6.0)
        flipped = [(-x if (i % 2 == 0) else x) for i, x in enumerate(vals)]
        v2 = TailedCuboid(tuple(Interval.point(x) for x in flipped), 0.0, 6.0)
        for k in range(1, 2 * M + 1):
            a = kf.eval_N_head(v1, k)
            b = kf.eval_N_head(v2, k)
            if k % 2 == 1:
                assert abs(a.mid + b.mid) < 1e-12
            else:
                assert abs(a.mid - b.mid) < 1e-12


def test_eval_N_head_range_guard():
    v = make_SC(0.2, 1.2, 3, 6.0, 3)
    with pytest.raises(kf.IndexBeyondExplicitRange):
        kf.eval_N_head(v, 7)


def test_eval_N_head_contains_point_values():
    """Interval N_k encloses pointwise N_k for sampled points (truncated field)."""
    rng = random.Random(9)
    M = 5
    for _ in range(30):
        vals = [rng.uniform(-0.4, 0.4) for _ in range(M)]
        v = TailedCuboid(tuple(Interval.point(x) for x in vals), 0.0, 6.0)

        def a(i):
            return vals[i - 1] if 1 <= i <= M else 0.0

        for k in range(1, 2 * M + 1):
            fs = -k * sum(a(i) * a(k - i) for i in range(1, k))
            is_ = 2 * k * sum(a(i) * a(k + i) for i in range(1, M + 1))
            assert kf.eval_N_head(v, k).contains(fs + is_)


def test_S_bound_pure_tail_example():
    v = TailedCuboid((Interval.point(0.0),), 1.0, 3.0)
    b = kf.S_bound(3, v)
    oracle, oracle_hi = truncated_S(v, 3)
    assert b.hi >= oracle_hi
    assert abs(b.hi - 0.125) < 1e-9
    assert oracle < 0.09


def test_S_bound_zero_cuboid():
    v = TailedCuboid((Interval.point(0.0),) * 3, 0.0, 6.0)
    assert kf.S_bound(1, v).hi == 0.0


def test_S_bound_head_plus_tail():
    head = (Interval.symmetric(0.5), Interval.symmetric(0.25), Interval.symmetric(0.1))
    v = TailedCuboid(head, 1.0, 4.0)
    b = kf.S_bound(1, v)
    _, oracle_hi = truncated_S(v, 1)
    assert b.hi >= oracle_hi


def test_K_bound_pure_tail_example():
    v = TailedCuboid((Interval.point(0.0),), 1.0, 4.0)
    b = kf.K_bound(2, 0, v)
    oracle = sum(j * tail_mag(v, j) for j in range(2, TRUNC + 1))
    assert b.hi >= oracle
    assert b.hi == pytest.approx(0.5, abs=1e-9)


def test_K_bound_zero_cuboid():
    v = TailedCuboid((Interval.point(0.0),) * 2, 0.0, 6.0)
    assert kf.K_bound(1, 3, v).hi == 0.0


def test_K_bound_negative_shift_doubles():
    v = TailedCuboid((Interval.point(0.0),) * 2, 1.0, 6.0)
    pos = kf.K_bound(8, 2, v)
    neg = kf.K_bound(8, -2, v)
    # the negative-shift remainder uses the doubled integral estimate
    oracle_neg = sum(j * tail_mag(v, j - 2) for j in range(8, TRUNC + 1))
    assert neg.hi >= oracle_neg
    assert neg.hi > pos.hi


def test_K_bound_invalid_shift():
    # r = max(l, M+|n|+1) = 7 here, and 2|n| = 10 > 7 breaks the shifted-sum
    # halving argument
    v = TailedCuboid((Interval.point(0.0),), 1.0, 6.0)
    with pytest.raises(kf.InvalidShift):
        kf.K_bound(2, -5, v)


def test_tail_block_bounds_zero_D():
    v = TailedCuboid((Interval.symmetric(0.3),) * 3, 0.0, 6.0)
    for rep in kf.tail_block_bounds(2, v):
        assert rep.bound.hi == 0.0


def test_fs_tail_zero_below_2M():
    v = TailedCuboid((Interval.symmetric(0.3),) * 4, 1.0, 6.0)
    for k in range(1, 9):
        assert kf.fs_tail_bound(k, v).hi == 0.0
    assert kf.fs_tail_bound(9, v).hi > 0.0


def is_oracle(v, k):
    return 2 * k * sum(tail_mag(v, i) * tail_mag(v, k + i)
                       for i in range(v.M + 1, TRUNC + 1))


def fs_oracle(v, k):
    return k * sum(tail_mag(v, i) * tail_mag(v, k - i)
                   for i in range(v.M + 1, k - v.M))


def test_is_tail_bound_spec_example():
    v = TailedCuboid((Interval.symmetric(1.0),) * 4, 1.0, 6.0)
    b = kf.is_tail_bound(2, v)
    assert b.hi >= is_oracle(v, 2)


def test_tail_bounds_dominate_randomized():
    rng = random.Random(42)
    for _ in range(500):
        v = random_cuboid(rng)
        M = v.M
        k = rng.randint(1, 4 * M + 6)
        assert kf.is_tail_bound(k, v).hi >= is_oracle(v, k) - 1e-15
        if k > 2 * M:
            assert kf.fs_tail_bound(k, v).hi >= fs_oracle(v, k) - 1e-15


def deriv_row_oracle(v, k):
    """sum_i |dN_k^{>=M+1}/da_i| truncated: derivative of the far part."""
    M = v.M
    tot = 0.0
    # IS^{>=M+1}_k = 2k sum_{j>M} a_j a_{k+j}
    for i in range(M + 1, TRUNC + 1):          # d/da_i, i = j
        tot += 2 * k * tail_mag(v, k + i)
    for i in range(k + M + 1, TRUNC + 1):      # d/da_i, i = k + j
        tot += 2 * k * tail_mag(v, i - k)
    # FS^{>=M+1}_k = -k sum_{j=M+1}^{k-M-1} a_j a_{k-j}
    for i in range(M + 1, k - M):
        tot += 2 * k * tail_mag(v, k - i)
    return tot


def deriv_col_oracle(v, k):
    """sum_i |dN_i^{>=M+1}/da_k| truncated."""
    M = v.M
    if k <= M:
        return 0.0
    tot = 0.0
    for i in range(1, TRUNC + 1):
        # IS_i: j = k term and i+j = k term
        tot += 2 * i * tail_mag(v, i + k)
        if M + 1 <= k - i:
            tot += 2 * i * tail_mag(v, k - i)
        # FS_i (i > 2M): j = k and i-j = k, each giving a_{i-k}
        if i > 2 * M and M + 1 <= k <= i - M - 1:
            tot += 2 * i * tail_mag(v, i - k)
    return tot


def test_deriv_bounds_dominate_randomized():
    rng = random.Random(7)
    for _ in range(250):
        v = random_cuboid(rng, M=rng.randint(1, 5), s=rng.uniform(4.0, 8.0))
        M = v.M
        k = rng.randint(1, 3 * M + 4)
        assert kf.deriv_row_bound(k, v).hi >= deriv_row_oracle(v, k) - 1e-15
        assert kf.deriv_col_bound(k, v).hi >= deriv_col_oracle(v, k) - 1e-15


def test_deriv_col_zero_below_M():
    v = random_cuboid(random.Random(3), M=4)
    for k in range(1, 5):
        assert kf.deriv_col_bound(k, v).hi == 0.0


def test_deriv_spec_example_case():
    v = TailedCuboid((Interval.symmetric(1.0),) * 3, 1.0, 6.0)
    k = 4
    assert kf.deriv_row_bound(k, v).hi >= deriv_row_oracle(v, k)
    assert kf.deriv_col_bound(k, v).hi >= deriv_col_oracle(v, k)


def tildeN_value_oracle(v, k):
    M = v.M
    return 2 * k * sum(tail_mag(v, i) * (tail_mag(v, k - i) + tail_mag(v, k + i))
                       for i in range(1, M + 1))


def tildeN_row_oracle(v, k):
    M = v.M
    tot = 0.0
    for i in range(1, M + 1):
        tot += 2 * k * (tail_mag(v, k - i) + tail_mag(v, k + i))  # d/da_i
        tot += 2 * k * tail_mag(v, i)                              # d/da_{k-i}
        tot += 2 * k * tail_mag(v, i)                              # d/da_{k+i}
    return tot


def tildeN_col_oracle(v, l):
    M = v.M
    tot = 0.0
    for k in range(2 * M + 1, TRUNC + 1):
        d = 0.0
        if 1 <= l <= M:
            d += 2 * k * (tail_mag(v, k - l) + tail_mag(v, k + l))
        if 1 <= k - l <= M:
            d += 2 * k * tail_mag(v, k - l)
        if 1 <= l - k <= M:
            d += 2 * k * tail_mag(v, l - k)
    # careful: a_l may appear as the a_{k+i} factor too (l = k+i)
        if 1 <= l - k <= M:
            pass
        tot += d
    return tot


def test_tildeN_zero_head():
    v = TailedCuboid((Interval.point(0.0),) * 3, 1.0, 6.0)
    assert kf.tildeN_value_bound(7, v).hi == 0.0


def test_tildeN_range_guard():
    v = random_cuboid(random.Random(5), M=3)
    with pytest.raises(kf.RangeMismatch):
        kf.tildeN_bounds(6, v)


def test_tildeN_bounds_dominate_randomized():
    rng = random.Random(11)
    for _ in range(250):
        v = random_cuboid(rng, M=rng.randint(1, 5), s=rng.uniform(4.0, 8.0))
        M = v.M
        k = 2 * M + 1 + rng.randint(0, 6)
        assert kf.tildeN_value_bound(k, v).hi >= tildeN_value_oracle(v, k) - 1e-15
        assert kf.tildeN_row_bound(k, v).hi >= tildeN_row_oracle(v, k) - 1e-15
        l = rng.randint(1, 2 * M)
        assert kf.tildeN_col_bound(l, v).hi >= tildeN_col_oracle(v, l) - 1e-15


def test_tildeN_single_head_mode_direct():
    head = (Interval.symmetric(0.7),)
    v = TailedCuboid(head, 1.0, 6.0)
    k = 3  # 2M+1
    assert kf.tildeN_value_bound(k, v).hi >= tildeN_value_oracle(v, k)


def test_bounds_monotone_in_tail_C():
    rng = random.Random(13)
    for _ in range(60):
        v = random_cuboid(rng, M=3, s=6.0)
        bigger = TailedCuboid(v.head, v.tail_C * 2 + 0.1, v.tail_s)
        k = rng.randint(1, 10)
        assert kf.is_tail_bound(k, bigger).hi >= kf.is_tail_bound(k, v).hi
        assert kf.deriv_row_bound(k, bigger).hi >= kf.deriv_row_bound(k, v).hi
        assert kf.S_bound(1, bigger).hi >= kf.S_bound(1, v).hi
