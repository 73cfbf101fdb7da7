"""Tailed cuboids: a finite head of per-mode intervals plus a uniform power tail.

A :class:`TailedCuboid` with head length M, tail constant C and exponent s
represents the product set

    prod_{k=1}^{M} head[k]  x  prod_{k>M} [-C/k^s, +C/k^s]

which is the concrete form of the self-consistent bound sets used throughout:
the S_C family has mode 1 equal to [-zeta C, zeta C] and every other mode
equal to +-C^omega/k^s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .interval import Interval, IntervalError, _up


class InvalidShapeParams(IntervalError):
    pass


class FaceOutOfHead(IntervalError):
    pass


@dataclass(frozen=True)
class FaceId:
    mode: int
    sign: int  # +1 or -1

    def __post_init__(self):
        if self.mode < 1:
            raise InvalidShapeParams("face mode must be >= 1")
        if self.sign not in (+1, -1):
            raise InvalidShapeParams("face sign must be +1 or -1")


@dataclass(frozen=True)
class TailedCuboid:
    head: tuple  # tuple[Interval], modes 1..M
    tail_C: float
    tail_s: float

    def __post_init__(self):
        if self.tail_C < 0.0:
            raise InvalidShapeParams("tail_C must be >= 0")
        if self.tail_s <= 2.0:
            raise InvalidShapeParams("tail_s must be > 2")
        object.__setattr__(self, "head", tuple(self.head))

    @property
    def M(self) -> int:
        return len(self.head)

    def mode(self, k: int) -> Interval:
        """Interval for mode k (1-based; k <= 0 is the zero mode)."""
        if k <= 0:
            return Interval.point(0.0)
        if k <= self.M:
            return self.head[k - 1]
        r = _up(self.tail_C / math.pow(float(k), self.tail_s))
        return Interval(-r, r)

    def mode_mag(self, k: int) -> float:
        """sup |a_k| over the set."""
        return self.mode(k).mag()

    def with_mode(self, k: int, iv: Interval) -> "TailedCuboid":
        if not (1 <= k <= self.M):
            raise FaceOutOfHead(f"mode {k} beyond head length {self.M}")
        head = list(self.head)
        head[k - 1] = iv
        return TailedCuboid(tuple(head), self.tail_C, self.tail_s)

    def scale_head(self, factor: float) -> "TailedCuboid":
        return TailedCuboid(tuple(h.widen(factor) if factor >= 1.0 else
                                  Interval(h.mid + factor * (h.lo - h.mid),
                                           h.mid + factor * (h.hi - h.mid))
                                  for h in self.head),
                            self.tail_C, self.tail_s)

    def to_json_dict(self):
        return {
            "head": [[h.lo, h.hi] for h in self.head],
            "tail_C": self.tail_C,
            "tail_s": self.tail_s,
        }

    @staticmethod
    def from_json_dict(d) -> "TailedCuboid":
        head = tuple(Interval(float(lo), float(hi)) for lo, hi in d["head"])
        return TailedCuboid(head, float(d["tail_C"]), float(d["tail_s"]))


def make_SC(C: float, zeta: float, omega: int, s: float, M: int,
            bif_mode: int = 1) -> TailedCuboid:
    """The S_C set: bifurcation mode = [-zeta C, zeta C], others +-C^omega/k^s.

    ``bif_mode`` generalizes the family to bifurcations carried by a mode
    other than 1 (the even-ladder case uses mode 2).
    """
    if C <= 0.0:
        raise InvalidShapeParams("C must be > 0")
    if zeta <= 1.0:
        raise InvalidShapeParams("zeta must be > 1")
    if omega < 3:
        raise InvalidShapeParams("omega must be >= 3")
    if s <= 2.0:
        raise InvalidShapeParams("s must be > 2")
    if M < 1 or not (1 <= bif_mode <= M):
        raise InvalidShapeParams("need 1 <= bif_mode <= M")
    c_om = _up(math.pow(C, float(omega)))
    head = []
    for k in range(1, M + 1):
        if k == bif_mode:
            r = _up(zeta * C)
        else:
            r = _up(c_om / math.pow(float(k), s))
        head.append(Interval(-r, r))
    return TailedCuboid(tuple(head), c_om, s)


def contains(outer: TailedCuboid, inner: TailedCuboid) -> bool:
    """True iff every mode interval of inner is inside that of outer.

    Head modes are compared directly; beyond both heads the tails compare
    analytically: C_i/k^{s_i} <= C_o/k^{s_o} for all k > K0 iff it holds at
    k = K0+1 and s_i >= s_o (tail decays at least as fast), or C_i = 0.
    """
    k0 = max(outer.M, inner.M)
    for k in range(1, k0 + 1):
        if not outer.mode(k).contains_interval(inner.mode(k)):
            return False
    if inner.tail_C == 0.0:
        return True
    if inner.tail_s < outer.tail_s:
        return False
    k = k0 + 1
    return (inner.tail_C / math.pow(float(k), inner.tail_s)
            <= outer.tail_C / math.pow(float(k), outer.tail_s))


def face(v: TailedCuboid, f: FaceId) -> TailedCuboid:
    """Pin mode f.mode to its f.sign endpoint (a degenerate interval)."""
    if f.mode > v.M:
        raise FaceOutOfHead(f"face mode {f.mode} beyond head length {v.M}")
    iv = v.head[f.mode - 1]
    x = iv.hi if f.sign > 0 else iv.lo
    return v.with_mode(f.mode, Interval.point(x))


def tail_sq_summable(v: TailedCuboid) -> bool:
    """Condition C2: sum of squared mode bounds finite; analytic via s > 2."""
    return v.tail_s > 2.0
