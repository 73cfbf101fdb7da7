"""Computer-assisted normal forms: bound-triple algebra and term removal.

The engine tracks, for the first N = 2M modes, an explicit polynomial head
with interval coefficients plus order-bound envelopes (value / row-sum /
column-sum) for everything else, on a fixed working shape: the S_C family
with the bifurcation slot zeta*C and every other slot C^omega/k^s, inflated
by a small factor so the shape keeps dominating the sets produced by the
coordinate changes.

A removal step substitutes a_k = b_k + c*m(b) with c = 1/(sum_i lambda_i
alpha_i - lambda_k); the removed monomial's coefficient cancels exactly for
every pointwise parameter value, so it is dropped structurally (the
interval assembly would otherwise reintroduce spurious width).  All induced
terms are either tracked explicitly or absorbed into the envelopes through
the product / composition / pullback rules, including the geometric-series
tail g(x) = sum_{j>=2} (-x)^j with |g| <= 2x^2 and |g'| <= 8x^2 + 4|x| for
|x| < 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .interval import Interval, IntervalError, isum
from .ks_field import _pow_iv, lambda_k


class ResonantTerm(IntervalError):
    pass


class MixedFormalOrder(IntervalError):
    pass


class MismatchedConstant(IntervalError):
    pass


class DomainGuardViolated(IntervalError):
    pass


class DimensionMismatch(IntervalError):
    pass


class ShapeBudgetExceeded(IntervalError):
    pass


# ---------------------------------------------------------------------------
# Order bounds: the triple (d, n, C) representing d * C^n
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrderBound:
    d: Interval
    n: int
    C: Interval

    def __post_init__(self):
        if self.d.lo < 0.0:
            raise IntervalError("OrderBound coefficient must be >= 0")
        if self.n < 0:
            raise IntervalError("OrderBound order must be >= 0")

    def _check(self, other: "OrderBound"):
        if self.C is not other.C and (self.C.lo, self.C.hi) != (other.C.lo, other.C.hi):
            raise MismatchedConstant("order bounds share one constant C")

    def is_zero(self) -> bool:
        return self.d.lo == 0.0 and self.d.hi == 0.0

    def __add__(self, other: "OrderBound") -> "OrderBound":
        self._check(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        a, b = (self, other) if self.n <= other.n else (other, self)
        d = a.d + self.C.pow_int(b.n - a.n) * b.d
        return OrderBound(Interval(max(0.0, d.lo), d.hi), a.n, self.C)

    def __mul__(self, other: "OrderBound") -> "OrderBound":
        self._check(other)
        d = self.d * other.d
        return OrderBound(Interval(max(0.0, d.lo), d.hi), self.n + other.n, self.C)

    def pow(self, m: int) -> "OrderBound":
        if m < 0:
            raise IntervalError("pow exponent must be >= 0")
        out = OrderBound(Interval.point(1.0), 0, self.C)
        for _ in range(m):
            out = out * self
        return out

    def scale(self, x) -> "OrderBound":
        xi = x if isinstance(x, Interval) else Interval.point(float(x))
        if xi.lo < 0.0:
            raise IntervalError("scale factor must be >= 0")
        d = self.d * xi
        return OrderBound(Interval(max(0.0, d.lo), d.hi), self.n, self.C)

    def eval(self) -> Interval:
        e = self.d * self.C.pow_int(self.n)
        return Interval(max(0.0, e.lo), e.hi)

    @staticmethod
    def zero(C: Interval) -> "OrderBound":
        return OrderBound(Interval.point(0.0), 0, C)


def ob_add(a: OrderBound, b: OrderBound) -> OrderBound:
    return a + b


def ob_mul(a: OrderBound, b: OrderBound) -> OrderBound:
    return a * b


def ob_pow(a: OrderBound, m: int) -> OrderBound:
    return a.pow(m)


def ob_eval(a: OrderBound) -> Interval:
    return a.eval()


def ob_dominate(a: OrderBound, b: OrderBound) -> OrderBound:
    """An order bound whose evaluation dominates both operands for C <= C_bar."""
    a._check(b)
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    lo, hi = (a, b) if a.n <= b.n else (b, a)
    folded = hi.d * a.C.pow_int(hi.n - lo.n)
    d = Interval(0.0, max(lo.d.hi, folded.hi))
    return OrderBound(d, lo.n, a.C)


# ---------------------------------------------------------------------------
# Sparse polynomials with interval coefficients
# ---------------------------------------------------------------------------
# A monomial is a tuple of (var, exp) pairs sorted by var; vars are 1-based
# mode indices.  The empty tuple is the constant monomial (never produced by
# the KS field but supported).

def mono(d: dict) -> tuple:
    return tuple(sorted((v, e) for v, e in d.items() if e))


def mono_mul(a: tuple, b: tuple) -> tuple:
    out = dict(a)
    for v, e in b:
        out[v] = out.get(v, 0) + e
    return mono(out)


def mono_degree(a: tuple) -> int:
    return sum(e for _, e in a)


class Poly(dict):
    """monomial -> Interval coefficient; zero coefficients are pruned."""

    @staticmethod
    def zero() -> "Poly":
        return Poly()

    @staticmethod
    def term(coeff, monomial: tuple) -> "Poly":
        c = coeff if isinstance(coeff, Interval) else Interval.point(float(coeff))
        p = Poly()
        if not (c.lo == 0.0 and c.hi == 0.0):
            p[monomial] = c
        return p

    def add(self, other: "Poly") -> "Poly":
        out = Poly(self)
        for m, c in other.items():
            if m in out:
                s = out[m] + c
                if s.lo == 0.0 and s.hi == 0.0:
                    del out[m]
                else:
                    out[m] = s
            else:
                out[m] = c
        return out

    def scale(self, x) -> "Poly":
        xi = x if isinstance(x, Interval) else Interval.point(float(x))
        out = Poly()
        for m, c in self.items():
            out[m] = c * xi
        return out

    def mul(self, other: "Poly") -> "Poly":
        out = Poly()
        for m1, c1 in self.items():
            for m2, c2 in other.items():
                m = mono_mul(m1, m2)
                c = c1 * c2
                if m in out:
                    out[m] = out[m] + c
                else:
                    out[m] = c
        return out

    def partial(self, v: int) -> "Poly":
        out = Poly()
        for m, c in self.items():
            md = dict(m)
            e = md.get(v, 0)
            if e:
                md[v] = e - 1
                key = mono(md)
                add = c * Interval.point(float(e))
                out[key] = out[key] + add if key in out else add
        return out

    def substitute(self, v: int, repl: "Poly") -> "Poly":
        """Replace variable v by the polynomial repl (repl includes b_v)."""
        out = Poly()
        for m, c in self.items():
            md = dict(m)
            e = md.pop(v, 0)
            base = Poly.term(c, mono(md))
            if e:
                powp = Poly.term(1.0, mono({}))
                for _ in range(e):
                    powp = powp.mul(repl)
                base = base.mul(powp)
            out = out.add(base)
        return out

    def eval_box(self, box: dict) -> Interval:
        """Interval evaluation; box maps var -> Interval."""
        acc = Interval.point(0.0)
        for m, c in self.items():
            term = c
            for v, e in m:
                term = term * box[v].pow_int(e)
            acc = acc + term
        return acc


# ---------------------------------------------------------------------------
# The working shape: slot order bounds sigma_hat
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Shape:
    """Slot profile |a_v| <= scale_v C^{n_v}; default scale C^omega/v^s.

    The bifurcation slot is zeta C (times bif_scale for gamma-restricted
    runs).  ``profile`` overrides (scale, order) per mode; the mu ~ 1/4
    even-ladder case needs higher-order slots on the cascade-driven odd
    modes, built by :func:`cascade_profile`.
    """

    N: int
    bif_mode: int
    zeta: float
    omega: int
    s: float
    C: Interval
    inflate: float = 1.0
    bif_scale: float = 1.0
    profile: tuple = ()      # ((mode, scale, order), ...)

    def _profile_map(self):
        return {m: (sc, n) for m, sc, n in self.profile}

    def slot(self, v: int) -> OrderBound:
        if v == self.bif_mode:
            d = Interval.point(self.zeta * self.bif_scale)
            return OrderBound(d, 1, self.C)
        prof = self._profile_map().get(v)
        if prof is not None:
            sc, n = prof
            return OrderBound(Interval.point(sc), n, self.C)
        d = Interval.point(1.0) / _pow_iv(float(v), self.s)
        return OrderBound(Interval(max(d.lo, 0.0), d.hi), self.omega, self.C)

    def slot_order(self, v: int) -> int:
        if v == self.bif_mode:
            return 1
        prof = self._profile_map().get(v)
        return prof[1] if prof is not None else self.omega

    def box(self) -> dict:
        """Signed interval box for vars 1..N (symmetric slots)."""
        out = {}
        for v in range(1, self.N + 1):
            r = self.slot(v).eval().hi
            out[v] = Interval(-r, r)
        return out


def cascade_profile(bif_mode: int, N: int, s: float, omega: int, zeta: float,
                    mu: Interval, C: Interval) -> tuple:
    """Slot profile for a bifurcation carried by mode b > 1.

    Multiples of b form the invariant sub-ladder and keep the standard
    C^omega/(v/b)^s slots in ladder units.  Every other mode is driven by
    bifurcation-mode products at order omega + 1 (the far-tail coupling
    2v a_b a_{v+b} sets an order-(omega+1) floor), so those modes get flat
    order-(omega+1) slots: wide on unstable modes, narrow on stable ones.
    The condition verifier certifies the profile a posteriori through the
    face checks, so these are choices, not claims.
    """
    if bif_mode == 1:
        return ()
    out = []
    for v in range(1, N + 1):
        if v == bif_mode:
            continue
        if v % bif_mode == 0:
            j = v // bif_mode
            sc = (Interval.point(1.0) / _pow_iv(float(j), s)).hi
            out.append((v, sc, omega))
        else:
            lam = lambda_k(mu, v)
            sc = 0.05 if lam.lo > 0.0 else 5e-4
            out.append((v, sc, omega + 1))
    return tuple(out)


def poly_value_bound(p: Poly, shape: Shape) -> OrderBound:
    out = OrderBound.zero(shape.C)
    for m, c in p.items():
        t = OrderBound(c.abs(), 0, shape.C)
        for v, e in m:
            t = t * shape.slot(v).pow(e)
        out = out + t
    return out


def poly_partial_bound(p: Poly, v: int, shape: Shape) -> OrderBound:
    return poly_value_bound(p.partial(v), shape)


def poly_hs_bound(p: Poly, shape: Shape) -> OrderBound:
    out = OrderBound.zero(shape.C)
    seen = set()
    for m, _ in p.items():
        for v, _e in m:
            if v not in seen:
                seen.add(v)
                out = out + poly_partial_bound(p, v, shape)
    return out


# ---------------------------------------------------------------------------
# Tracked equations and the system
# ---------------------------------------------------------------------------

@dataclass
class TrackedEq:
    lam: Interval
    poly: Poly
    rem_val: OrderBound
    rem_hs: OrderBound


@dataclass
class CoordinateChange:
    target: int
    monomial: tuple
    coeff: Interval
    c: Interval
    p: Poly

    def to_json_dict(self):
        return {
            "target": self.target,
            "monomial": {str(v): e for v, e in self.monomial},
            "coeff": [self.coeff.lo, self.coeff.hi],
            "c": [self.c.lo, self.c.hi],
        }


class NFSystem:
    """The tracked system b_k' = lambda_k b_k + P_k(b) + r_k(b)."""

    def __init__(self, mu: Interval, M: int, s: float, p_exp: float,
                 omega: int, zeta: float, bif_mode: int, C: Interval,
                 bif_scale: float = 1.0, image_slots: dict | None = None,
                 poly_only: bool = False, profile: tuple = ()):
        self.mu = mu
        self.M = M
        self.N = 2 * M
        self.s = s
        self.p_exp = p_exp
        self.omega = omega
        self.zeta = zeta
        self.bif_mode = bif_mode
        self.C = C
        self.shape = Shape(self.N, bif_mode, zeta, omega, s, C, 1.0,
                           bif_scale, profile)
        self._image = image_slots or {}
        self.poly_only = poly_only
        self.g_arg_max = 0.0
        self.changes: list[CoordinateChange] = []
        self.var_map: dict[int, Poly] = {}
        self._build_initial()

    def istar(self, v: int) -> OrderBound:
        """Image-shape slot: dominates |a_v| over the composed image of the
        final-coordinate set under every prefix of the change list."""
        return self._image.get(v) or self.shape.slot(v)

    def _istar_value_bound(self, p: Poly) -> OrderBound:
        out = OrderBound.zero(self.C)
        for m, c in p.items():
            t = OrderBound(c.abs(), 0, self.C)
            for v, e in m:
                t = t * self.istar(v).pow(e)
            out = out + t
        return out

    def _istar_hs_bound(self, p: Poly) -> OrderBound:
        out = OrderBound.zero(self.C)
        seen = set()
        for m, _ in p.items():
            for v, _e in m:
                if v not in seen:
                    seen.add(v)
                    out = out + self._istar_value_bound(p.partial(v))
        return out

    # -- construction ---------------------------------------------------

    def _D(self) -> OrderBound:
        """Tail constant D with slot_v <= D / v^s for every v > M.

        The default profile gives D = C^omega; ladder profiles carry larger
        head slots in (M, N], so D picks up the worst normalized scale
        (orders above omega fold through C_bar powers).
        """
        worst = 1.0
        for v in range(self.M + 1, self.N + 1):
            sl = self.shape.slot(v)
            dv = (sl.d * _pow_iv(float(v), self.s)
                  * self.C.pow_int(sl.n - self.omega)).hi
            worst = max(worst, dv)
        return OrderBound(Interval(0.0, worst), self.omega, self.C)

    def _ob(self, x: float, n: int = 0) -> OrderBound:
        return OrderBound(Interval(0.0, Interval.point(x).hi), n, self.C)

    def _head_slot_sum(self) -> OrderBound:
        out = OrderBound.zero(self.C)
        for i in range(1, self.M + 1):
            out = out + self.shape.slot(i)
        return out

    def _build_initial(self):
        M, N, s = self.M, self.N, self.s
        D = self._D()
        mu = self.mu
        self.eqs: dict[int, TrackedEq] = {}
        self.rem_vs: dict[int, OrderBound] = {
            v: OrderBound.zero(self.C) for v in range(1, N + 1)}
        sa = OrderBound.zero(self.C)
        for i in range(1, M + 1):
            sa = sa + self.istar(i)

        for k in range(1, N + 1):
            poly = Poly()
            for i in range(1, k):
                key = mono({i: 2}) if i == k - i else mono({i: 1, k - i: 1})
                poly = poly.add(Poly.term(Interval.point(-float(k)), key))
            for i in range(1, N - k + 1):
                t = Poly.term(Interval.point(2.0 * k), mono({i: 1, k + i: 1}))
                poly = poly.add(t)
            rem_val = OrderBound.zero(self.C)
            rem_hs = OrderBound.zero(self.C)
            # IS terms with head factor i <= M but k+i beyond the window
            for i in range(max(1, N - k + 1), M + 1):
                si = self.istar(i)
                sk = OrderBound(Interval(0.0, (Interval.point(1.0)
                                               / _pow_iv(float(k + i), s)).hi),
                                self.omega, self.C)
                rem_val = rem_val + (si * sk).scale(2.0 * k)
                rem_hs = rem_hs + sk.scale(2.0 * k) + si.scale(2.0 * k)
                self.rem_vs[i] = self.rem_vs[i] + sk.scale(2.0 * k)
            # far part IS^{>=M+1}: value and rows
            if k <= M:
                den = (_pow_iv(float(k + M + 1), s) * Interval.point(s - 1.0)
                       * _pow_iv(float(M), s - 1.0))
                coeff = Interval.point(2.0 * k) / den
            else:
                den = (_pow_iv(float(k), s - 2.0) * Interval.point(s)
                       * _pow_iv(float(M), s))
                coeff = Interval.point(2.0) / den
            rem_val = rem_val + (D * D).scale(coeff)
            row_den = _pow_iv(float(M), s - 1.0) * Interval.point(s - 1.0)
            rem_hs = rem_hs + D.scale(Interval.point(4.0 * k) / row_den)
            self.eqs[k] = TrackedEq(lambda_k(mu, k), poly, rem_val, rem_hs)
            self.var_map[k] = Poly.term(1.0, mono({k: 1}))

        # column sums of the remainder sequence (all equations), vars <= N
        for v in range(1, N + 1):
            if v > M:
                t1 = D.scale(Interval.point(2.0)
                             / (Interval.point(s - 2.0) * _pow_iv(float(M), s - 2.0)))
                t2 = D.scale(Interval.point(4.0 * v)
                             / (Interval.point(s - 1.0) * _pow_iv(float(M), s - 1.0)))
                t3 = D.scale(Interval.point(2.0)
                             / (Interval.point(s - 2.0) * _pow_iv(float(v), s - 2.0)))
                self.rem_vs[v] = self.rem_vs[v] + t1 + t2 + t3
            # tilde-N columns of the envelope equations k > N
            if v <= M:
                base = float(2 * M - v)
                c1 = D.scale(Interval.point(1.0)
                             / (Interval.point(s - 2.0) * _pow_iv(base, s - 2.0)))
                c2 = D.scale(Interval.point(float(v))
                             / (Interval.point(s - 1.0) * _pow_iv(base, s - 1.0)))
                c3 = D.scale(Interval.point(1.0)
                             / (Interval.point(s - 2.0) * _pow_iv(float(2 * M + v), s - 2.0)))
                self.rem_vs[v] = self.rem_vs[v] + (c1 + c2 + c3).scale(2.0)
            else:
                self.rem_vs[v] = self.rem_vs[v] + sa.scale(4.0 * v)

        # envelope constants for k > N (eta(k) = k^{2-s}, zeta(k) = xi(k) = k).
        # tilde-N value: |tilde N_k| <= 2k sum_i slot_i (|a_{k-i}| + |a_{k+i}|)
        # <= 2k (sum slots) (max_i |a_{k-i}| + max_i |a_{k+i}|); explicit slot
        # lookups in the mixed regime N < k <= N+M, pure tail beyond (where
        # max|a_{k-i}| = D/(k-M)^s and the normalized form decreases in k).
        np1 = float(N + 1)

        def slot_or_tail(v: int) -> OrderBound:
            if v <= N:
                return self.istar(v)
            return OrderBound(Interval(0.0, (D.d / _pow_iv(float(v), s)).hi),
                              self.omega, self.C)

        env_val = OrderBound.zero(self.C)
        for k in range(N + 1, N + M + 1):
            acc = OrderBound.zero(self.C)
            for i in range(1, M + 1):
                acc = acc + self.istar(i) * (slot_or_tail(k - i)
                                             + slot_or_tail(k + i))
            cand = acc.scale(Interval.point(2.0 * k) * _pow_iv(float(k), s - 2.0))
            env_val = ob_dominate(env_val, cand)
        # pure-tail regime k >= k0: each k^{s-1}/(k -+ i)^s term decreases in k
        k0 = N + M + 1
        acc = OrderBound.zero(self.C)
        for i in range(1, M + 1):
            w = (_pow_iv(float(k0), s - 1.0) / _pow_iv(float(k0 - i), s)
                 + _pow_iv(float(k0), s - 1.0) / _pow_iv(float(k0 + i), s))
            acc = acc + (self.istar(i) * D).scale(w)
        env_val = ob_dominate(env_val, acc.scale(2.0))
        env_val = env_val + (D * D).scale(
            Interval.point(2.0) / (Interval.point(s) * _pow_iv(float(M), s)))
        env_val = env_val + (D * D).scale(
            _pow_iv(2.0, s + 1.0) / (Interval.point(s - 1.0)
                                     * _pow_iv(float(M), s - 1.0) * Interval.point(np1)))
        self.env_val = env_val

        env_hs = D.scale((Interval.point(2.0) / Interval.point(s - 1.0))
                         * (_pow_iv(float(N - M), 1.0 - s) + _pow_iv(np1, 1.0 - s)))
        env_hs = env_hs + sa.scale(4.0)
        env_hs = env_hs + D.scale(Interval.point(6.0)
                                  / (_pow_iv(float(M), s - 1.0) * Interval.point(s - 1.0)))
        self.env_hs = env_hs

        # xi-normalized column envelope for vars j > N
        vs_env = sa.scale(2.0)
        t1 = D.scale(Interval.point(2.0) / (Interval.point(s - 2.0)
                                            * _pow_iv(float(M), s - 2.0)
                                            * Interval.point(np1)))
        t2 = D.scale(Interval.point(4.0)
                     / (Interval.point(s - 1.0) * _pow_iv(float(M), s - 1.0)))
        t3 = D.scale(Interval.point(2.0)
                     / (Interval.point(s - 2.0) * _pow_iv(np1, s - 1.0)))
        vs_env = vs_env + t1 + t2 + t3 + sa.scale(4.0)
        self.vs_env = vs_env

    # -- removal steps ----------------------------------------------------

    def resonance_coefficient(self, monomial: tuple, k: int) -> Interval:
        """c = 1/(sum_i lambda_i alpha_i - lambda_k), certified nonresonant."""
        acc = Interval.point(0.0)
        for v, e in monomial:
            acc = acc + lambda_k(self.mu, v) * Interval.point(float(e))
        denom = acc - lambda_k(self.mu, k)
        if denom.straddles_zero():
            raise ResonantTerm(f"denominator {denom} contains 0 "
                               f"for {monomial} in equation {k}")
        return Interval.point(1.0) / denom

    def _g_bounds(self, xbar: OrderBound):
        """(g-hat, gprime-hat) per |g| <= 2x^2, |g'| <= 8x^2 + 4|x|."""
        e = xbar.eval().hi
        self.g_arg_max = max(self.g_arg_max, e)
        if not (e < 0.5):
            raise DomainGuardViolated(f"g argument bound {e} >= 1/2")
        ghat = (xbar * xbar).scale(2.0)
        gp = (xbar * xbar).scale(8.0) + xbar.scale(4.0)
        return ghat, gp

    def apply_change(self, k: int, monomial: tuple):
        """Remove the monomial (present in P_k) via a_k = b_k + c*m(b)."""
        if not all(1 <= v <= self.N for v, _ in monomial):
            raise DimensionMismatch("monomial vars must lie in the window")
        eq = self.eqs[k]
        if monomial not in eq.poly:
            raise IntervalError(f"monomial {monomial} not present in P_{k}")
        coeff = eq.poly[monomial]
        c = self.resonance_coefficient(monomial, k) * coeff
        m_poly = Poly.term(Interval.point(1.0), monomial)        # bare monomial
        p = m_poly.scale(c)                                      # the shift p(b)
        x_poly = p.partial(k)
        repl = Poly.term(1.0, mono({k: 1})).add(p)
        if not self.poly_only:
            xbar = self._istar_value_bound(x_poly)
            ghat, gp_hat = self._g_bounds(xbar)
            hs_p = self._istar_hs_bound(p)
            hs_x = self._istar_hs_bound(x_poly)

        # ---- numerator assembly for equation k (exact polynomials) -----
        sub_Qk = eq.poly.substitute(k, repl)
        num = sub_Qk
        # lambda_k * p
        num = num.add(p.scale(eq.lam))
        # - sum_{i != k} dp/da_i * lambda_i a_i   (Euler: = -c m sum lam_i alpha_i)
        lam_sum = Interval.point(0.0)
        for v, e in monomial:
            if v != k:
                lam_sum = lam_sum + lambda_k(self.mu, v) * Interval.point(float(e))
        num = num.add(m_poly.scale(-(c * lam_sum)))
        # - sum_{i != k} dp/da_i * P_i(a(b))
        for v, _e in monomial:
            if v == k:
                continue
            dmdv = p.partial(v)
            sub_Qi = self.eqs[v].poly.substitute(k, repl)
            num = num.add(dmdv.mul(sub_Qi).scale(-1.0))

        # ---- multiply by (1 - x); gather the removed-monomial residue ---
        new_poly = num.add(num.mul(x_poly).scale(-1.0))
        # - lambda_k b_k * x  (from the linear part times (1 - x))
        new_poly = new_poly.add(
            Poly.term(eq.lam, mono({k: 1})).mul(x_poly).scale(-1.0))
        # The removed monomial's net coefficient vanishes for every pointwise
        # parameter value; drop it structurally (assert the interval admits 0).
        if monomial in new_poly:
            resid = new_poly[monomial]
            if not resid.contains(0.0):
                raise IntervalError(
                    f"cancellation residue {resid} for {monomial} excludes 0")
            del new_poly[monomial]

        if self.poly_only:
            new_eq = TrackedEq(eq.lam, new_poly, eq.rem_val, eq.rem_hs)
            for i in range(1, self.N + 1):
                if i == k:
                    continue
                ei = self.eqs[i]
                self.eqs[i] = TrackedEq(ei.lam, ei.poly.substitute(k, repl),
                                        ei.rem_val, ei.rem_hs)
            self.eqs[k] = new_eq
        else:
            # ---- envelope absorption for equation k ----------------------
            num_val = self._istar_value_bound(num)
            num_hs = self._istar_hs_bound(num)
            lam_abs = eq.lam.abs()
            slot_k = self.istar(k)
            one = OrderBound(Interval.point(1.0), 0, self.C)

            rem_val = OrderBound.zero(self.C)
            rem_hs = OrderBound.zero(self.C)
            # lambda_k b_k g(x), numerator * g(x); HS(g o x) <= (8x^2+4x)HS(x)
            rem_val = rem_val + (slot_k.scale(lam_abs) + num_val) * ghat
            rem_hs = rem_hs + ghat.scale(lam_abs)
            rem_hs = rem_hs + (slot_k.scale(lam_abs) + num_val) * gp_hat * hs_x \
                + num_hs * ghat
            # old remainder of eq k and dragged-in remainders of eqs i != k,
            # each times (1 - x + g(x)); pulled-back row sums gain (1 + HS p)
            factor = one + xbar + ghat
            pull = one + hs_p
            hs_factor = hs_x * (one + gp_hat)
            r_val = eq.rem_val
            r_hs = eq.rem_hs * pull
            for v, _e in monomial:
                if v == k:
                    continue
                dm_bar = self._istar_value_bound(p.partial(v))
                dm_hs = self._istar_hs_bound(p.partial(v)) * pull
                ri = self.eqs[v]
                r_val = r_val + dm_bar * ri.rem_val
                r_hs = r_hs + dm_hs * ri.rem_val + dm_bar * (ri.rem_hs * pull)
            rem_val = rem_val + r_val * factor
            rem_hs = rem_hs + r_hs * factor + r_val * hs_factor

            new_eq = TrackedEq(eq.lam, new_poly, rem_val, rem_hs)

            for i in range(1, self.N + 1):
                if i == k:
                    continue
                ei = self.eqs[i]
                self.eqs[i] = TrackedEq(ei.lam, ei.poly.substitute(k, repl),
                                        ei.rem_val, ei.rem_hs * pull)
            self.eqs[k] = new_eq

            # ---- column sums: VS_l' <= VS_l + dp/da_l * VS_k, plus the new
            # remainder terms of eq k (row sum bounds every column entry)
            vs_k = self.rem_vs[k]
            for l in range(1, self.N + 1):
                bump = rem_hs
                dpl = self._istar_value_bound(p.partial(l))
                if dpl.eval().hi > 0.0:
                    bump = bump + dpl * vs_k
                self.rem_vs[l] = self.rem_vs[l] + bump
            self.vs_env = self.vs_env + rem_hs.scale(
                Interval.point(1.0) / Interval.point(float(self.N + 1)))

        # ---- variable map composition -----------------------------------
        for v in list(self.var_map):
            self.var_map[v] = self.var_map[v].substitute(k, repl)
        self.changes.append(CoordinateChange(k, monomial, coeff, c, p))

    # -- extraction -------------------------------------------------------

    def cubic_coefficient(self) -> Interval:
        key = mono({self.bif_mode: 3})
        c = self.eqs[self.bif_mode].poly.get(key)
        if c is None:
            raise IntervalError("no cubic term tracked on the bifurcation mode")
        return c

    def h_poly(self, k: int) -> Poly:
        """P_k minus the designated normal-form cubic (bifurcation mode)."""
        p = Poly(self.eqs[k].poly)
        if k == self.bif_mode:
            p.pop(mono({k: 3}), None)
        return p

    def h_value_bound(self, k: int) -> OrderBound:
        return poly_value_bound(self.h_poly(k), self.shape) + self.eqs[k].rem_val

    def h_hs_bound(self, k: int) -> OrderBound:
        return poly_hs_bound(self.h_poly(k), self.shape) + self.eqs[k].rem_hs

    def h_vs_bound(self, v: int) -> OrderBound:
        out = self.rem_vs[v]
        for i in range(1, self.N + 1):
            out = out + poly_partial_bound(self.h_poly(i), v, self.shape)
        return out

    def h_combo_bound(self, k: int) -> OrderBound:
        """2|d h_k/d b_k| + sum_{i!=k} |d h_k/d b_i| + |d h_i/d b_k| <= HS + VS."""
        return self.h_hs_bound(k) + self.h_vs_bound(k)

    # -- cone margins for the transformed field over the shape set --------

    def cone_margins(self, unstable: tuple, box_override: dict | None = None):
        """Gamma-margins of the b-field over the (un-inflated) shape set.

        Explicit rows use signed interval evaluation of the tracked
        polynomial derivatives; remainder rows/columns enter through the
        HS/VS envelopes.  Returns (per-mode margins 1..N, far-tail margin
        certified for every i > N).
        """
        N = self.N
        box = box_override or {
            v: Interval.symmetric(self.shape.slot(v).eval().hi)
            for v in range(1, N + 1)
        }
        margins = []
        dmat = {}
        for i in range(1, N + 1):
            for j in range(1, N + 1):
                dmat[(i, j)] = self.eqs[i].poly.partial(j).eval_box(box)
        for i in range(1, N + 1):
            qi = 1.0 if i in unstable else -1.0
            diag = self.eqs[i].lam + dmat[(i, i)]
            acc = Interval.point(2.0 * (Interval.point(qi) * diag).lo)
            for j in range(1, N + 1):
                if j == i:
                    continue
                qj = 1.0 if j in unstable else -1.0
                comb = (Interval.point(qj) * dmat[(j, i)]
                        + Interval.point(qi) * dmat[(i, j)])
                acc = acc - Interval.point(comb.abs().hi)
            acc = acc - Interval.point(2.0 * self.eqs[i].rem_hs.eval().hi)
            acc = acc - Interval.point(self.rem_vs[i].eval().hi)
            margins.append(acc)
        # far rows i > N: 2|lambda_i| - 3 zeta(i) env_hs - xi(i) vs_env > 0
        # normalizes to 2(mu i^3 - i) > 3 e(env_hs) + e(vs_env), monotone in i
        i0 = N + 1
        ii = Interval.point(float(i0))
        lhs = Interval.point(2.0) * (self.mu * ii.pow_int(3) - ii)
        rhs = (Interval.point(3.0) * self.env_hs.eval()
               + self.vs_env.eval())
        far = (lhs - rhs) * ii  # margin scale: 2|lam| - i*(sums)
        margins_far = Interval.point(far.lo)
        return margins, margins_far


@dataclass
class NormalFormSystem:
    """Final tables: value/derivative bounds per mode plus tail constants."""

    mu: Interval
    bif_mode: int
    M: int
    N: int
    s: float
    p_exp: float
    omega: int
    zeta: float
    c_mu: Interval                      # cubic coefficient, must be negative
    h_val: dict                         # k -> OrderBound (value of h_k)
    h_combo: dict                       # k -> OrderBound (HS + VS combo)
    env_val: OrderBound                 # uniform alpha for k > N (order-bound)
    env_combo: OrderBound               # uniform k-normalized combo for k > N
    g_arg_max: float
    changes: list
    system: NFSystem

    def value_table(self):
        """Rows (k, alpha_k/k^p, order) for k = 1..N plus the uniform row."""
        rows = []
        for k in range(1, self.N + 1):
            ob = self.h_val[k]
            rows.append((k, ob.d.hi, ob.n))
        rows.append((self.N + 1, self.env_val.d.hi, self.env_val.n))
        return rows

    def deriv_table(self):
        rows = []
        for k in range(1, self.N + 1):
            ob = self.h_combo[k]
            rows.append((k, ob.d.hi, ob.n))
        rows.append((self.N + 1, self.env_combo.d.hi, self.env_combo.n))
        return rows

    def alpha_n(self, k: int):
        """(alpha_k, n_k) with |h_k| < alpha_k C^{n_k} / k^p."""
        if k <= self.N:
            ob = self.h_val[k]
            alpha = ob.d * _pow_iv(float(k), self.p_exp)
        else:
            ob = self.env_val
            alpha = ob.d * _pow_iv(float(k), self.p_exp - (self.s - 2.0))
        return Interval(0.0, alpha.hi), ob.n

    def beta_d(self, k: int):
        """(beta_k, d_k) with combo_k < beta_k k C^{d_k}."""
        if k <= self.N:
            ob = self.h_combo[k]
            beta = ob.d / Interval.point(float(k))
        else:
            ob = self.env_combo
            beta = ob.d
        return Interval(0.0, beta.hi), ob.n


def ks_pipeline(mu: Interval, M: int, s: float, p_exp: float, omega: int,
                zeta: float, bif_mode: int, C: Interval, removals,
                bif_scale: float = 1.0,
                profile: tuple | None = None) -> NormalFormSystem:
    """Build the KS system, apply the removal list, extract the tables.

    ``removals`` is an ordered list of (equation index, exponent dict).
    Pass 1 runs the polynomial transformations only to discover the
    composed variable map; its prefix value bounds build the image shape
    on which pass 2 evaluates every envelope absorption.
    """
    if profile is None:
        profile = cascade_profile(bif_mode, 2 * M, s, omega, zeta, mu, C)
    pre = NFSystem(mu, M, s, p_exp, omega, zeta, bif_mode, C,
                   bif_scale=bif_scale, poly_only=True, profile=profile)
    ident = {v: Poly.term(1.0, mono({v: 1})) for v in range(1, pre.N + 1)}
    for eq_idx, expo in removals:
        pre.apply_change(eq_idx, mono(expo))

    # Image slots: for each suffix stage t, the final-coordinate bound of the
    # stage-t coordinates over the final set; the running dominator covers
    # every stage at which absorbed constants are later re-ranged.
    shifts = {v: OrderBound.zero(C) for v in range(1, pre.N + 1)}
    suff = dict(ident)
    for ch in reversed(pre.changes):
        k_t = ch.target
        p_comp = Poly.zero()
        for m, coeff in ch.p.items():
            termp = Poly.term(coeff, mono({}))
            for v, e in m:
                for _ in range(e):
                    termp = termp.mul(suff[v])
            p_comp = p_comp.add(termp)
        suff = dict(suff)
        suff[k_t] = suff[k_t].add(p_comp)
        for v in range(1, pre.N + 1):
            sp = suff[v].add(ident[v].scale(-1.0))
            if sp:
                shifts[v] = ob_dominate(
                    shifts[v], poly_value_bound(sp, pre.shape))
    image = {v: pre.shape.slot(v) + shifts[v] for v in range(1, pre.N + 1)}

    sys_ = NFSystem(mu, M, s, p_exp, omega, zeta, bif_mode, C,
                    bif_scale=bif_scale, image_slots=image, profile=profile)
    for eq_idx, expo in removals:
        sys_.apply_change(eq_idx, mono(expo))
    # final guard: the image slots dominate the composed variable map
    for v in range(1, sys_.N + 1):
        got = poly_value_bound(sys_.var_map[v], sys_.shape).eval().hi
        if got > sys_.istar(v).eval().hi * (1.0 + 1e-9):
            raise ShapeBudgetExceeded(f"image slot for var {v} too small")
    # without removals there is no tracked cubic (system left as-is)
    c_mu = sys_.cubic_coefficient() if removals else Interval.point(0.0)
    h_val = {k: sys_.h_value_bound(k) for k in range(1, sys_.N + 1)}
    h_combo = {k: sys_.h_combo_bound(k) for k in range(1, sys_.N + 1)}
    env_combo = sys_.env_hs + sys_.vs_env
    return NormalFormSystem(
        mu=mu, bif_mode=bif_mode, M=M, N=sys_.N, s=s, p_exp=p_exp,
        omega=omega, zeta=zeta, c_mu=c_mu, h_val=h_val, h_combo=h_combo,
        env_val=sys_.env_val, env_combo=env_combo,
        g_arg_max=sys_.g_arg_max, changes=list(sys_.changes), system=sys_)


DEFAULT_REMOVALS_MU1 = (
    (1, {1: 1, 2: 1}),   # 2 a1 a2 from F1
    (2, {1: 2}),         # -2 a1^2 from F2
    (3, {1: 3}),         # induced b1^3 in F3 (via a2 = b2 + c2 b1^2)
    (3, {1: 1, 2: 1}),   # -6 a1 a2 remnant in F3 (order-4 face drive)
    (1, {1: 2, 3: 1}),   # induced b1^2 a3 in F1 (keeps the deriv order at 3)
    (4, {1: 4}),         # induced b1^4 in F4 (from -4 a2^2), order-4 face drive
    (2, {1: 4}),         # induced b1^4 in F2 (via the b1^3 change in F3)
)

DEFAULT_REMOVALS_MU025 = (
    (2, {2: 1, 4: 1}),   # 4 a2 a4 from F2
    (4, {2: 2}),         # -4 a2^2 from F4
    (6, {2: 3}),         # induced b2^3 in F6
    (2, {2: 2, 6: 1}),   # induced b2^2 a6 in F2
    (1, {2: 1, 3: 1}),   # 2 a2 a3 from F1 (kills the order-1 column entry)
    (3, {1: 1, 2: 1}),   # -6 a1 a2 from F3 (decouples the odd cascade pair)
    (8, {2: 4}),         # induced b2^4 in F8 (from -8 a4^2)
)

