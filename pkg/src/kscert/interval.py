"""Directed-rounding interval arithmetic and small interval linear algebra.

Outward rounding is realized by stepping endpoints to the next representable
float after each natively rounded operation (``math.nextafter``), so results
enclose the exact real-arithmetic image of their operands without touching
the FPU rounding mode.  The empty interval is an explicit sentinel, never a
NaN pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_INF = math.inf


class IntervalError(Exception):
    pass


class DivisionByZeroInterval(IntervalError):
    pass


class NegativeSqrtDomain(IntervalError):
    pass


class NonSquare(IntervalError):
    pass


class SingularEnclosure(IntervalError):
    pass


def _down(x: float) -> float:
    return math.nextafter(x, -_INF)


def _up(x: float) -> float:
    return math.nextafter(x, _INF)


def _sum_down(a: float, b: float) -> float:
    """Lower bound for a + b: skip the outward step when the sum is exact.

    Exactness is certified by the compensated check (t - a == b and
    t - b == a); sums that land exactly on 0 or subnormals are exact by
    Hauser's theorem and pass the check as well.
    """
    t = a + b
    if t - a == b and t - b == a:
        return t
    return math.nextafter(t, -_INF)


def _sum_up(a: float, b: float) -> float:
    t = a + b
    if t - a == b and t - b == a:
        return t
    return math.nextafter(t, _INF)


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] with lo <= hi, or the empty sentinel."""

    lo: float
    hi: float
    empty: bool = False

    def __post_init__(self):
        if not self.empty:
            if math.isnan(self.lo) or math.isnan(self.hi):
                raise IntervalError("NaN endpoint")
            if self.lo > self.hi:
                raise IntervalError(f"inverted interval [{self.lo}, {self.hi}]")

    # -- constructors -------------------------------------------------

    @staticmethod
    def point(x: float) -> "Interval":
        return Interval(float(x), float(x))

    @staticmethod
    def exact(lo: float, hi: float) -> "Interval":
        return Interval(float(lo), float(hi))

    @staticmethod
    def around(x: float) -> "Interval":
        """Smallest nondegenerate enclosure of a float (1 ulp each side)."""
        x = float(x)
        return Interval(_down(x), _up(x))

    @staticmethod
    def symmetric(r: float) -> "Interval":
        r = abs(float(r))
        return Interval(-r, r)

    # -- queries -------------------------------------------------------

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def rad(self) -> float:
        m = self.mid
        return max(_up(self.hi - m), _up(m - self.lo))

    @property
    def width(self) -> float:
        return _up(self.hi - self.lo)

    def mag(self) -> float:
        """sup |x| over the interval."""
        return max(abs(self.lo), abs(self.hi))

    def mig(self) -> float:
        """inf |x| over the interval (0 if it straddles 0)."""
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def contains(self, x: float) -> bool:
        return (not self.empty) and self.lo <= x <= self.hi

    def contains_interval(self, other: "Interval") -> bool:
        if other.empty:
            return True
        if self.empty:
            return False
        return self.lo <= other.lo and other.hi <= self.hi

    def straddles_zero(self) -> bool:
        return (not self.empty) and self.lo <= 0.0 <= self.hi

    def __repr__(self):
        if self.empty:
            return "Interval(empty)"
        return f"[{self.lo!r}, {self.hi!r}]"

    # -- arithmetic ----------------------------------------------------

    def __neg__(self) -> "Interval":
        if self.empty:
            return EMPTY
        return Interval(-self.hi, -self.lo)

    def __add__(self, other) -> "Interval":
        other = _coerce(other)
        if self.empty or other.empty:
            return EMPTY
        return Interval(_sum_down(self.lo, other.lo), _sum_up(self.hi, other.hi))

    __radd__ = __add__

    def __sub__(self, other) -> "Interval":
        other = _coerce(other)
        if self.empty or other.empty:
            return EMPTY
        return Interval(_sum_down(self.lo, -other.hi), _sum_up(self.hi, -other.lo))

    def __rsub__(self, other) -> "Interval":
        return _coerce(other).__sub__(self)

    def __mul__(self, other) -> "Interval":
        other = _coerce(other)
        if self.empty or other.empty:
            return EMPTY
        if (self.lo == 0.0 and self.hi == 0.0) or (other.lo == 0.0 and other.hi == 0.0):
            return ZERO
        p = (self.lo * other.lo, self.lo * other.hi,
             self.hi * other.lo, self.hi * other.hi)
        return Interval(_down(min(p)), _up(max(p)))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Interval":
        other = _coerce(other)
        if self.empty or other.empty:
            return EMPTY
        if other.lo <= 0.0 <= other.hi:
            raise DivisionByZeroInterval(f"denominator {other} contains 0")
        p = (self.lo / other.lo, self.lo / other.hi,
             self.hi / other.lo, self.hi / other.hi)
        return Interval(_down(min(p)), _up(max(p)))

    def __rtruediv__(self, other) -> "Interval":
        return _coerce(other).__truediv__(self)

    def abs(self) -> "Interval":
        if self.empty:
            return EMPTY
        if self.lo >= 0.0:
            return self
        if self.hi <= 0.0:
            return -self
        return Interval(0.0, max(-self.lo, self.hi))

    def pow_int(self, n: int) -> "Interval":
        if n < 0:
            raise IntervalError("pow_int exponent must be >= 0")
        if self.empty:
            return EMPTY
        if n == 0:
            return Interval(1.0, 1.0)
        if n % 2 == 0 and self.straddles_zero():
            m = self.mag()
            if m == 0.0:
                return ZERO
            hi = m
            for _ in range(n - 1):
                hi = _up(hi * m)
            return Interval(0.0, hi)
        out = self
        for _ in range(n - 1):
            out = out * self
        return out

    def sqrt(self) -> "Interval":
        if self.empty:
            return EMPTY
        if self.lo < 0.0:
            raise NegativeSqrtDomain(f"sqrt of {self}")
        return Interval(max(0.0, _down(math.sqrt(self.lo))),
                        _up(math.sqrt(self.hi)))

    def exp(self) -> "Interval":
        if self.empty:
            return EMPTY
        # libm exp is not guaranteed correctly rounded: step 2 ulps outward
        return Interval(max(0.0, _down(_down(math.exp(self.lo)))),
                        _up(_up(math.exp(self.hi))))

    def expm1(self) -> "Interval":
        if self.empty:
            return EMPTY
        return Interval(max(-1.0, _down(_down(math.expm1(self.lo)))),
                        _up(_up(math.expm1(self.hi))))

    def hull(self, other) -> "Interval":
        other = _coerce(other)
        if self.empty:
            return other
        if other.empty:
            return self
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other) -> "Interval":
        other = _coerce(other)
        if self.empty or other.empty:
            return EMPTY
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return EMPTY
        return Interval(lo, hi)

    def widen(self, factor: float) -> "Interval":
        """Multiplicative widening about the midpoint (factor >= 1)."""
        if self.empty:
            return EMPTY
        m = self.mid
        lo = _down(m + factor * _down(self.lo - m))
        hi = _up(m + factor * _up(self.hi - m))
        return Interval(min(lo, self.lo), max(hi, self.hi))


EMPTY = Interval(_INF, -_INF, empty=True)
ZERO = Interval(0.0, 0.0)
ONE = Interval(1.0, 1.0)


def _coerce(x) -> Interval:
    if isinstance(x, Interval):
        return x
    if isinstance(x, (int, float)):
        return Interval.point(float(x))
    raise TypeError(f"cannot coerce {type(x)!r} to Interval")


def hull_all(items) -> Interval:
    out = EMPTY
    for it in items:
        out = out.hull(_coerce(it))
    return out


def isum(items) -> Interval:
    out = ZERO
    for it in items:
        out = out + it
    return out


# ---------------------------------------------------------------------------
# phi functions for the exponential-Euler propagation step
# ---------------------------------------------------------------------------

def phi1(z: Interval) -> Interval:
    """Enclosure of (e^z - 1)/z, continued by 1 at z = 0 (monotone increasing)."""
    def at(x: float) -> Interval:
        xi = Interval.point(x)
        if abs(x) < 1e-3:
            # 1 + z/2 + z^2/6 + r, |r| <= |z|^3 for |z| < 1
            r = abs(x) ** 3
            ser = ONE + xi * 0.5 + (xi * xi) * (1.0 / 6.0)
            return ser + Interval(-_up(r), _up(r))
        return xi.expm1() / xi
    lo = at(z.lo)
    hi = at(z.hi)
    return Interval(min(lo.lo, hi.lo), max(lo.hi, hi.hi))


def phi2(z: Interval) -> Interval:
    """Enclosure of (e^z - 1 - z)/z^2, continued by 1/2 at z = 0 (monotone)."""
    def at(x: float) -> Interval:
        xi = Interval.point(x)
        if abs(x) < 1e-3:
            r = abs(x) ** 3
            ser = Interval.point(0.5) + xi * (1.0 / 6.0) + (xi * xi) * (1.0 / 24.0)
            return ser + Interval(-_up(r), _up(r))
        return (xi.expm1() - xi) / (xi * xi)
    lo = at(z.lo)
    hi = at(z.hi)
    return Interval(min(lo.lo, hi.lo), max(lo.hi, hi.hi))


# ---------------------------------------------------------------------------
# Interval matrices
# ---------------------------------------------------------------------------

class IntervalMatrix:
    """Dense rectangular matrix of intervals (sizes here stay <= ~32)."""

    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows: int, cols: int, data=None):
        self.rows = rows
        self.cols = cols
        if data is None:
            self.data = [[ZERO for _ in range(cols)] for _ in range(rows)]
        else:
            if len(data) != rows or any(len(r) != cols for r in data):
                raise IntervalError("ragged matrix data")
            self.data = [[_coerce(x) for x in row] for row in data]

    @staticmethod
    def identity(n: int) -> "IntervalMatrix":
        m = IntervalMatrix(n, n)
        for i in range(n):
            m.data[i][i] = ONE
        return m

    @staticmethod
    def from_floats(arr) -> "IntervalMatrix":
        rows = len(arr)
        cols = len(arr[0])
        return IntervalMatrix(rows, cols,
                              [[Interval.point(float(x)) for x in row] for row in arr])

    def __getitem__(self, ij):
        i, j = ij
        return self.data[i][j]

    def __setitem__(self, ij, val):
        i, j = ij
        self.data[i][j] = _coerce(val)

    def midpoints(self):
        return [[x.mid for x in row] for row in self.data]

    def transpose(self) -> "IntervalMatrix":
        out = IntervalMatrix(self.cols, self.rows)
        for i in range(self.rows):
            for j in range(self.cols):
                out.data[j][i] = self.data[i][j]
        return out

    def __add__(self, other: "IntervalMatrix") -> "IntervalMatrix":
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise IntervalError("shape mismatch")
        out = IntervalMatrix(self.rows, self.cols)
        for i in range(self.rows):
            for j in range(self.cols):
                out.data[i][j] = self.data[i][j] + other.data[i][j]
        return out

    def __matmul__(self, other: "IntervalMatrix") -> "IntervalMatrix":
        if self.cols != other.rows:
            raise IntervalError("shape mismatch")
        out = IntervalMatrix(self.rows, other.cols)
        for i in range(self.rows):
            for j in range(other.cols):
                acc = ZERO
                for k in range(self.cols):
                    acc = acc + self.data[i][k] * other.data[k][j]
                out.data[i][j] = acc
        return out

    def matvec(self, v):
        if self.cols != len(v):
            raise IntervalError("shape mismatch")
        return [isum(self.data[i][k] * v[k] for k in range(self.cols))
                for i in range(self.rows)]

    def norm_1_upper(self) -> Interval:
        """Upper bound for the column-sum norm over every point matrix."""
        best = 0.0
        for j in range(self.cols):
            s = isum(self.data[i][j].abs() for i in range(self.rows))
            best = max(best, s.hi)
        return Interval(0.0, best)

    def norm_inf_upper(self) -> Interval:
        """Upper bound for the row-sum norm over every point matrix."""
        best = 0.0
        for i in range(self.rows):
            s = isum(self.data[i][j].abs() for j in range(self.cols))
            best = max(best, s.hi)
        return Interval(0.0, best)


def matrix_norms(a: IntervalMatrix):
    """(||A||_1, ||A||_inf) upper bounds valid for every point matrix in A."""
    return a.norm_1_upper(), a.norm_inf_upper()


def sym_eig_upper(m: IntervalMatrix) -> float:
    """Gershgorin upper bound for lambda_max of every symmetric point matrix in m."""
    if m.rows != m.cols:
        raise NonSquare(f"{m.rows}x{m.cols}")
    best = -_INF
    for i in range(m.rows):
        radius = isum(m.data[i][j].abs() for j in range(m.rows) if j != i)
        best = max(best, (m.data[i][i] + radius).hi)
    return best


def sym_eig_upper_bound(m: IntervalMatrix) -> Interval:
    """Interval form of :func:`sym_eig_upper`."""
    return Interval.point(sym_eig_upper(m))


def enclose_inverse(a: IntervalMatrix) -> IntervalMatrix:
    """Enclosure of P^{-1} for every point matrix P in a.

    Midpoint inverse + Neumann-series residual bound: with Y ~ mid(a)^{-1},
    if r := ||I - Y a||_inf < 1 then every P^{-1} lies within
    Y +- ||Y||_inf r/(1-r) entrywise.
    """
    import numpy as _np

    if a.rows != a.cols:
        raise NonSquare(f"{a.rows}x{a.cols}")
    n = a.rows
    mid = _np.array(a.midpoints(), dtype=float)
    try:
        y = _np.linalg.inv(mid)
    except _np.linalg.LinAlgError as exc:
        raise SingularEnclosure("midpoint matrix not invertible") from exc
    ym = IntervalMatrix.from_floats(y.tolist())
    resid = IntervalMatrix.identity(n)
    prod = ym @ a
    for i in range(n):
        for j in range(n):
            resid.data[i][j] = resid.data[i][j] - prod.data[i][j]
    r = resid.norm_inf_upper().hi
    if not (r < 1.0):
        raise SingularEnclosure(f"residual norm {r} >= 1")
    ynorm = ym.norm_inf_upper().hi
    ball = _up(_up(ynorm * r) / _down(1.0 - r))
    out = IntervalMatrix(n, n)
    for i in range(n):
        for j in range(n):
            out.data[i][j] = ym.data[i][j] + Interval(-ball, ball)
    return out
