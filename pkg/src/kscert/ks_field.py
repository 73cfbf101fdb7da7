"""The Kuramoto-Sivashinsky Fourier ladder and its tail/derivative sum bounds.

The ladder is

    a_k' = k^2 (1 - mu k^2) a_k  -  k sum_{i=1}^{k-1} a_i a_{k-i}
                                 + 2k sum_{i=1}^{inf} a_i a_{k+i}

with the nonlinearity N_k split, for a working head length M, into the
explicit part (indices coupling to the head) and the far part N_k^{>=M+1}
whose magnitude, row sums and column sums admit the closed-form bounds
implemented here.  Every bound returns an upper estimate valid for all
points of the tailed cuboid; each is tested against a truncated-sum oracle.

Two quoted closed forms were unsound as printed (a dropped leading 2k
factor, and (s-1) integral prefactors where (s-2) is needed); the versions
here are re-derived and oracle-checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .interval import Interval, IntervalError, isum, _up
from .cuboid import TailedCuboid


class IndexBeyondExplicitRange(IntervalError):
    pass


class InvalidShift(IntervalError):
    pass


class RangeMismatch(IntervalError):
    pass


@dataclass(frozen=True)
class KSParams:
    mu: Interval
    M: int
    m: int
    s: float
    p: float

    def __post_init__(self):
        if self.mu.lo <= 0.0:
            raise IntervalError("mu must be positive")
        if not (1 <= self.m <= self.M):
            raise IntervalError("need 1 <= m <= M")
        if self.s <= 2.0:
            raise IntervalError("need s > 2")


@dataclass(frozen=True)
class SumBoundReport:
    kind: str
    args: tuple
    bound: Interval


def lambda_k(mu: Interval, k: int) -> Interval:
    """Enclosure of k^2 (1 - mu k^2)."""
    if k < 1:
        raise IntervalError("k must be >= 1")
    ki = Interval.point(float(k))
    k2 = ki * ki
    return k2 * (Interval.point(1.0) - mu * k2)


def dN_entry(v: TailedCuboid, i: int, j: int) -> Interval:
    """Enclosure of dN_i/da_j over the cuboid (a_0 := 0, negative index 0)."""
    two_i = Interval.point(2.0 * i)
    acc = v.mode(i + j)
    if i > j:
        acc = acc - v.mode(i - j)
    elif j > i:
        acc = acc + v.mode(j - i)
    return two_i * acc


def dF_entry(v: TailedCuboid, mu: Interval, i: int, j: int) -> Interval:
    ent = dN_entry(v, i, j)
    if i == j:
        ent = ent + lambda_k(mu, i)
    return ent


# ---------------------------------------------------------------------------
# S and K sums (Lemmas "Sestm" / "Kestm")
# ---------------------------------------------------------------------------

def _pow_iv(base: float, expo: float) -> Interval:
    """Crude enclosure of base**expo for base > 0 (2 ulps outward)."""
    x = math.pow(base, expo)
    lo = math.nextafter(math.nextafter(x, -math.inf), -math.inf)
    hi = math.nextafter(math.nextafter(x, math.inf), math.inf)
    return Interval(max(0.0, lo), hi)


def sum_tail_upper(C: float, s: float, l: int) -> Interval:
    """[0, bound] with bound >= C * sum_{k>=l} k^{-s}, via integral over [l-1, inf)."""
    if l < 2:
        raise IntervalError("sum_tail_upper needs l >= 2")
    denom = Interval.point(s - 1.0) * _pow_iv(float(l - 1), s - 1.0)
    b = (Interval.point(C) / denom).hi
    return Interval(0.0, b)


def S_bound(l: int, v: TailedCuboid) -> Interval:
    """Upper bound for S(l) = sum_{k>=l} sup|a_k| over the cuboid."""
    if l < 1:
        raise IntervalError("l must be >= 1")
    M, C, s = v.M, v.tail_C, v.tail_s
    if l <= M:
        head = isum(Interval.point(v.mode_mag(k)) for k in range(l, M + 1))
        tail = sum_tail_upper(C, s, M + 1) if C > 0.0 else Interval.point(0.0)
        return Interval(0.0, (head + tail).hi)
    if C == 0.0:
        return Interval.point(0.0)
    return sum_tail_upper(C, s, l)


def K_bound(l: int, n: int, v: TailedCuboid) -> Interval:
    """Upper bound for K(l, n) = sum_{j>=l} j * sup|a_{j+n}| over the cuboid.

    Head part runs j = l..M-n explicitly; the remainder over j >= r with
    r = max(l, M-n+1) uses the integral estimates (n >= 1 keeps the
    second-term subtraction of the source lemma; n = 0 drops it; n < 0 uses
    the shifted-sum doubling, valid for n >= -r/2).
    """
    if l < 1:
        raise IntervalError("l must be >= 1")
    M, C, s = v.M, v.tail_C, v.tail_s
    r = max(l, M - n + 1)
    head = isum(Interval.point(float(j)) * Interval.point(v.mode_mag(j + n))
                for j in range(l, M - n + 1) if j + n >= 1)
    if C == 0.0:
        return Interval(0.0, head.hi)
    if n < 0 and 2 * (-n) > r:
        raise InvalidShift(f"shift n={n} too large for start index r={r}")
    Ci = Interval.point(C)
    if r + n - 1 < 1:
        raise InvalidShift(f"r+n-1 = {r + n - 1} < 1")
    main = Ci / (Interval.point(s - 2.0) * _pow_iv(float(r + n - 1), s - 2.0))
    if n >= 1:
        sub = Ci / (Interval.point(s - 1.0) * _pow_iv(float(r + n), s - 1.0))
        rem = main - sub
    elif n == 0:
        rem = main
    else:
        rem = Interval.point(2.0) * main
    return Interval(0.0, (head + rem).hi)


# ---------------------------------------------------------------------------
# Far-part blocks (IS/FS beyond M) and their derivative sums
# ---------------------------------------------------------------------------

def is_tail_bound(k: int, v: TailedCuboid) -> Interval:
    """[0, b] with b >= |IS F_k^{>=M+1}| on the cuboid.

    k <= M:  2k D^2 / ((k+M+1)^s (s-1) M^{s-1})
    k >  M:  2 D^2 / (k^{s-2} s M^s)     (uses (k+i)^s >= k^{s-1} i)
    """
    M, D, s = v.M, v.tail_C, v.tail_s
    if D == 0.0:
        return Interval.point(0.0)
    Di = Interval.point(D)
    if k <= M:
        num = Interval.point(2.0 * k) * Di * Di
        den = _pow_iv(float(k + M + 1), s) * Interval.point(s - 1.0) \
            * _pow_iv(float(M), s - 1.0)
        return Interval(0.0, (num / den).hi)
    num = Interval.point(2.0) * Di * Di
    den = _pow_iv(float(k), s - 2.0) * Interval.point(s) * _pow_iv(float(M), s)
    return Interval(0.0, (num / den).hi)


def fs_tail_bound(k: int, v: TailedCuboid) -> Interval:
    """[0, b] with b >= |FS F_k^{>=M+1}|; exactly 0 for k <= 2M.

    k > 2M:  2^{s+1} D^2 / (k^{s-1} (s-1) M^{s-1}).
    """
    M, D, s = v.M, v.tail_C, v.tail_s
    if k <= 2 * M or D == 0.0:
        return Interval.point(0.0)
    num = _pow_iv(2.0, s + 1.0) * Interval.point(D) * Interval.point(D)
    den = _pow_iv(float(k), s - 1.0) * Interval.point(s - 1.0) \
        * _pow_iv(float(M), s - 1.0)
    return Interval(0.0, (num / den).hi)


def tail_block_bounds(k: int, v: TailedCuboid):
    """The IS/FS far-part magnitude bounds applicable at index k."""
    if k < 1:
        raise RangeMismatch("k must be >= 1")
    out = [SumBoundReport("IS_tail", (k,), is_tail_bound(k, v)),
           SumBoundReport("FS_tail", (k,), fs_tail_bound(k, v))]
    return out


def deriv_row_bound(k: int, v: TailedCuboid) -> Interval:
    """[0, b] with b >= sum_i |dN_k^{>=M+1}/da_i| on the cuboid."""
    M, D, s = v.M, v.tail_C, v.tail_s
    if D == 0.0:
        return Interval.point(0.0)
    factor = 4.0 if k <= 2 * M + 1 else 6.0
    num = Interval.point(factor * k) * Interval.point(D)
    den = _pow_iv(float(M), s - 1.0) * Interval.point(s - 1.0)
    return Interval(0.0, (num / den).hi)


def deriv_col_bound(k: int, v: TailedCuboid) -> Interval:
    """[0, b] with b >= sum_i |dN_i^{>=M+1}/da_k| on the cuboid.

    Zero for k <= M.  For k > M (re-derived with correct integral
    prefactors, uniform over both index regimes):

        2D/((s-2) M^{s-2}) + 4kD/((s-1) M^{s-1}) + 2D/((s-2) k^{s-2})
    """
    M, D, s = v.M, v.tail_C, v.tail_s
    if k <= M or D == 0.0:
        return Interval.point(0.0)
    Di = Interval.point(D)
    t1 = Interval.point(2.0) * Di / (Interval.point(s - 2.0) * _pow_iv(float(M), s - 2.0))
    t2 = Interval.point(4.0 * k) * Di / (Interval.point(s - 1.0) * _pow_iv(float(M), s - 1.0))
    t3 = Interval.point(2.0) * Di / (Interval.point(s - 2.0) * _pow_iv(float(k), s - 2.0))
    return Interval(0.0, (t1 + t2 + t3).hi)


def deriv_sum_bounds(k: int, v: TailedCuboid):
    if k < 1:
        raise RangeMismatch("k must be >= 1")
    return [SumBoundReport("deriv_row", (k,), deriv_row_bound(k, v)),
            SumBoundReport("deriv_col", (k,), deriv_col_bound(k, v))]


# ---------------------------------------------------------------------------
# tilde-N: the explicit-head coupling for far indices k > 2M
# ---------------------------------------------------------------------------

def _head_abs_sum(v: TailedCuboid) -> Interval:
    return isum(Interval.point(v.mode_mag(i)) for i in range(1, v.M + 1))


def tildeN_value_bound(k: int, v: TailedCuboid) -> Interval:
    """|tilde N_k| <= 2k (sum A_i) [ sum_{i<=M}|a_{k-i}| + sum_{i<=M}|a_{k+i}| ]."""
    M, D, s = v.M, v.tail_C, v.tail_s
    if k <= 2 * M:
        raise RangeMismatch("tildeN bounds need k > 2M")
    sa = _head_abs_sum(v)
    if D == 0.0:
        near = Interval.point(0.0)
    else:
        near = sum_tail_upper(D, s, k - M) + sum_tail_upper(D, s, k + 1)
    out = Interval.point(2.0 * k) * sa * near
    return Interval(0.0, out.hi)


def tildeN_row_bound(k: int, v: TailedCuboid) -> Interval:
    """sum_i |d tilde N_k / da_i| <= 2k [S-parts] + 4k sum A_i."""
    M, D, s = v.M, v.tail_C, v.tail_s
    if k <= 2 * M:
        raise RangeMismatch("tildeN bounds need k > 2M")
    sa = _head_abs_sum(v)
    if D == 0.0:
        near = Interval.point(0.0)
    else:
        near = sum_tail_upper(D, s, k - M) + sum_tail_upper(D, s, k + 1)
    out = Interval.point(2.0 * k) * near + Interval.point(4.0 * k) * sa
    return Interval(0.0, out.hi)


def tildeN_col_bound(l: int, v: TailedCuboid) -> Interval:
    """sum_{k > 2M} |d tilde N_k / da_l| bound.

    l <= M: 2D [ (2M-l)^{2-s}/(s-2) + l (2M-l)^{1-s}/(s-1) + (2M+l)^{2-s}/(s-2) ]
    l >  M: 4 l sum A_i.
    """
    M, D, s = v.M, v.tail_C, v.tail_s
    if l <= M:
        if D == 0.0:
            return Interval.point(0.0)
        Di = Interval.point(D)
        base = float(2 * M - l)
        if base < 1.0:
            raise RangeMismatch("need 2M - l >= 1")
        t1 = Di / (Interval.point(s - 2.0) * _pow_iv(base, s - 2.0))
        t2 = Interval.point(float(l)) * Di / (Interval.point(s - 1.0) * _pow_iv(base, s - 1.0))
        t3 = Di / (Interval.point(s - 2.0) * _pow_iv(float(2 * M + l), s - 2.0))
        return Interval(0.0, (Interval.point(2.0) * (t1 + t2 + t3)).hi)
    return Interval(0.0, (Interval.point(4.0 * l) * _head_abs_sum(v)).hi)


def tildeN_bounds(k: int, v: TailedCuboid):
    if k <= 2 * v.M:
        raise RangeMismatch("tildeN bounds need k > 2M")
    return [SumBoundReport("tildeN_value", (k,), tildeN_value_bound(k, v)),
            SumBoundReport("tildeN_row", (k,), tildeN_row_bound(k, v)),
            SumBoundReport("tildeN_col", (k,), tildeN_col_bound(k, v))]


# ---------------------------------------------------------------------------
# Explicit enclosure of N_k over a cuboid (head indices)
# ---------------------------------------------------------------------------

def eval_N_head(v: TailedCuboid, k: int) -> Interval:
    """Enclosure of N_k over the cuboid for k <= 2M.

    Finite sums are evaluated with interval products of the per-mode
    intervals; the far IS remainder is absorbed through is_tail_bound
    (FS^{>=M+1} vanishes for k <= 2M).
    """
    M = v.M
    if k > 2 * M:
        raise IndexBeyondExplicitRange(f"k={k} beyond explicit range 2M={2*M}")
    if k < 1:
        raise IntervalError("k must be >= 1")
    fs = isum(v.mode(i) * v.mode(k - i) for i in range(1, k))
    is_ = isum(v.mode(i) * v.mode(k + i) for i in range(1, M + 1))
    out = Interval.point(-float(k)) * fs + Interval.point(2.0 * k) * is_
    rem = is_tail_bound(k, v)
    return out + Interval(-rem.hi, rem.hi)


def eval_F_head(v: TailedCuboid, mu: Interval, k: int) -> Interval:
    return lambda_k(mu, k) * v.mode(k) + eval_N_head(v, k)
