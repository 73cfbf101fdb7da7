"""The fourteen pitchfork-bifurcation conditions over a parameter range.

Conditions are evaluated from the normal-form tables: per-mode value bounds
(alpha_k, n_k), derivative combos (k beta_k, d_k), the cubic coefficient
c(mu) and the uniform tail envelopes.  Parameter extrema reduce to interval
endpoints (every lambda_k is linear in mu; C(mu) and c(mu) are monotone on
the post-bifurcation side), matching the source's monotonicity note.

Two conditions are implemented in the face-factored form their isolation
proof actually uses (the displayed full-set value bounds are provably
unsatisfiable for the even-ladder case): at a face |a_k| = slot_k the field
is a_k (lambda_k + q(a)) + h_k^free with q the a_k-divided part of h_k, so
the check compares lambda_k against the q bound plus the a_k-free bound
divided by the slot.  The K-folding C(theta) <= K C(theta') enters as a
K^n scaling of every C-power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .interval import Interval, IntervalError
from .ks_field import lambda_k, _pow_iv
from .normal_form import (
    NormalFormSystem,
    OrderBound,
    Poly,
    ks_pipeline,
    mono,
)


class PreBifurcationSide(IntervalError):
    pass


class MonotonicityNotEstablished(IntervalError):
    pass


@dataclass(frozen=True)
class BifParams:
    zeta: float
    omega: int
    s: float
    p: float
    K: float | None
    l: float
    gamma_minus: float
    gamma_plus: float
    M: int
    bif_mode: int = 1
    allow_gamma_above_one: bool = False

    def __post_init__(self):
        if not (self.zeta > 1.0 and self.omega >= 3 and self.l > 0.0):
            raise IntervalError("need zeta > 1, omega >= 3, l > 0")
        if not (0.0 < self.gamma_minus < self.gamma_plus):
            raise IntervalError("need 0 < gamma- < gamma+")
        if self.gamma_plus >= 1.0 and not self.allow_gamma_above_one:
            raise IntervalError("gamma+ >= 1 requires allow_gamma_above_one")


@dataclass(frozen=True)
class ParamRange:
    mu_minus: float
    mu_b: float
    mu_plus: float

    def full(self) -> Interval:
        return Interval(self.mu_minus, self.mu_plus)

    def post(self) -> Interval:
        """Post-bifurcation side (lambda_bif > 0): mu below mu_b for KS."""
        return Interval(self.mu_minus, self.mu_b)

    def pre(self) -> Interval:
        return Interval(self.mu_b, self.mu_plus)


def make_range(mu_lo: float, mu_hi: float, bif_mode: int) -> ParamRange:
    mu_b = 1.0 / float(bif_mode * bif_mode)
    if not (mu_lo < mu_b < mu_hi):
        raise IntervalError(
            f"range [{mu_lo}, {mu_hi}] must bracket mu_b = {mu_b}")
    return ParamRange(mu_lo, mu_b, mu_hi)


def C_of_mu(nf: NormalFormSystem, mu: Interval) -> Interval:
    """C(mu) = sqrt(lambda_bif(mu) / (-c(mu))), post-bifurcation side."""
    lam = lambda_k(mu, nf.bif_mode)
    if lam.lo < 0.0:
        raise PreBifurcationSide(f"lambda_bif = {lam} not nonnegative")
    c = nf.c_mu
    if c.hi >= 0.0:
        raise IntervalError(f"cubic coefficient {c} not negative")
    return (lam / (-c)).sqrt()


# ---------------------------------------------------------------------------

def _split_factored(nf: NormalFormSystem, k: int):
    """(q_bound, free_bound) with h_k = a_k q(a) + free(a) on the shape."""
    sys_ = nf.system
    hp = sys_.h_poly(k)
    qpoly = Poly()
    fpoly = Poly()
    for m, c in hp.items():
        md = dict(m)
        if md.get(k, 0) >= 1:
            md[k] -= 1
            key = mono(md)
            qpoly[key] = qpoly[key] + c if key in qpoly else c
        else:
            fpoly[m] = c
    from .normal_form import poly_value_bound

    qb = poly_value_bound(qpoly, sys_.shape)
    fb = poly_value_bound(fpoly, sys_.shape) + sys_.eqs[k].rem_val
    return qb, fb


def _slot_info(nf: NormalFormSystem, k: int):
    sl = nf.system.shape.slot(k)
    return sl.d, sl.n


@dataclass
class ConditionResult:
    name: str
    passed: bool
    margin: float
    note: str = ""

    def to_json_dict(self):
        return {"name": self.name, "pass": self.passed,
                "margin": self.margin, "note": self.note}


class PitchforkChecker:
    """Evaluates the fourteen conditions for one (nf, range, params) triple."""

    def __init__(self, nf: NormalFormSystem, nf_restricted: NormalFormSystem,
                 rng: ParamRange, params: BifParams):
        self.nf = nf
        self.nfr = nf_restricted
        self.rng = rng
        self.par = params
        self.b = params.bif_mode
        self.N = nf.N
        self.post = rng.post()
        self.full = rng.full()
        self.Cbar = C_of_mu(nf, Interval.point(rng.mu_minus))
        self.K = params.K if params.K is not None else math.sqrt(2.0) * (1 + 2e-16)
        # unstable set: lambda_k > 0 over the full range, k != bif
        self.unstable = tuple(
            k for k in range(1, self.N + 1)
            if k != self.b and lambda_k(self.full, k).lo > 0.0)
        self.m_count = 1 + len(self.unstable)
        self.c_abs = (-nf.c_mu).intersect(Interval(0.0, math.inf))

    # -- helpers ---------------------------------------------------------

    def _ratio_term(self, ob: OrderBound, k: int) -> float:
        """sup_theta' bound(K C(theta'))/ (slot_k(C(theta'))) at C = C_bar."""
        scale, n_slot = _slot_info(self.nf, k)
        if ob.n < n_slot:
            raise MonotonicityNotEstablished(
                f"free part of mode {k} has order {ob.n} < slot order {n_slot}")
        num = ob.d * _pow_iv(self.K, float(ob.n)) \
            * _pow_iv(self.Cbar.hi, float(ob.n - n_slot))
        return (num / scale).hi

    def _q_term(self, qb: OrderBound) -> float:
        return (qb.d * _pow_iv(self.K, float(qb.n))
                * _pow_iv(self.Cbar.hi, float(qb.n))).hi

    def _combo_eval(self, k: int, Cval: float, restricted: bool = False) -> float:
        nf = self.nfr if restricted else self.nf
        ob = nf.h_combo[k] if k <= self.N else nf.env_combo
        scale = 1.0 if k <= self.N else float(k)
        return (ob.d * _pow_iv(Cval, float(ob.n))).hi * scale

    def _stable_explicit(self):
        return [k for k in range(1, self.N + 1)
                if k != self.b and k not in self.unstable]

    # -- the conditions --------------------------------------------------

    def cond1(self) -> ConditionResult:
        """Unstable faces exit: lambda_k > q-bound + free/slot (K-folded)."""
        if not self.unstable:
            return ConditionResult("cond1", True, math.inf,
                                   "no unstable directions besides the "
                                   "bifurcation mode")
        worst = math.inf
        for k in self.unstable:
            lam = lambda_k(self.post, k)
            qb, fb = _split_factored(self.nf, k)
            margin = lam.lo - self._q_term(qb) - self._ratio_term(fb, k)
            worst = min(worst, margin)
        return ConditionResult("cond1", worst > 0.0, worst)

    def cond2(self) -> ConditionResult:
        """1 <= C(mu)/C(mid) <= K on the post side.

        C^2 = lambda_b |lambda_q| / coeff with lambda_b linear (ratio exactly
        2 at the midpoint) and |lambda_q| increasing in mu, so the ratio
        squared is 2 |lambda_q(mu)| / |lambda_q(mid)| <= 2; the lower bound
        needs 2 min |lambda_q| >= max |lambda_q| over the ranges.
        """
        q = self._resonance_mode()
        lam_q_post = lambda_k(self.post, q).abs()
        mid = Interval((self.rng.mu_minus + self.rng.mu_b) / 2.0, self.rng.mu_b)
        lam_q_mid = lambda_k(mid, q).abs()
        upper_margin = self.K - math.sqrt(2.0)
        lower_ok = 2.0 * lam_q_post.lo >= lam_q_mid.hi
        ok = (upper_margin >= 0.0) and lower_ok
        return ConditionResult("cond2", ok, upper_margin,
                               f"ratio^2 <= 2 structurally; lower bound "
                               f"{'ok' if lower_ok else 'fails'}")

    def _resonance_mode(self) -> int:
        # the cubic came from 1/lambda_q: q = 2*bif_mode
        return 2 * self.b

    def K_star(self) -> Interval:
        """2 C(mid(mu_+))^2 / C(mu_+)^2 -- the paper-style reported factor.

        C^2 is proportional to lambda_b |lambda_q| with the same cubic-source
        mode q, so the ratio is exact from the four lambda values.
        """
        mu_plus = Interval.point(self.rng.mu_minus)
        mid = Interval.point((self.rng.mu_minus + self.rng.mu_b) / 2.0)
        q = self._resonance_mode()
        num = (Interval.point(2.0) * lambda_k(mid, self.b)
               * lambda_k(mid, q).abs())
        den = lambda_k(mu_plus, self.b) * lambda_k(mu_plus, q).abs()
        return num / den

    def cond3_beta_premise(self) -> ConditionResult:
        full = self._combo_eval(self.b, self.Cbar.hi)
        restr = self._combo_eval(self.b, self.Cbar.hi, restricted=True)
        ok = 0.0 < restr < full
        return ConditionResult("cond3_beta1bar", ok, full - restr,
                               "restricted-set derivative bound below the "
                               "full-set bound")

    def cond4(self) -> ConditionResult:
        zeta = self.par.zeta
        ca = self.c_abs
        ratio_lo = (Interval.point(ca.lo) / Interval.point(ca.hi)).lo
        coef = (1.0 - zeta * zeta * ratio_lo) * zeta
        ob = self.nf.h_val[self.b]
        if ob.n < 3:
            raise MonotonicityNotEstablished("bifurcation value order < 3")
        term = (ob.d * _pow_iv(self.K, float(ob.n))
                * _pow_iv(self.Cbar.hi, float(ob.n - 3))
                / Interval.point(ca.lo)).hi
        margin = -(coef + term)
        return ConditionResult("cond4", margin > 0.0, margin)

    def cond5(self) -> ConditionResult:
        """Stable faces enter: |lambda_k| > q + free/slot, plus tail check."""
        worst = math.inf
        note = ""
        for k in self._stable_explicit():
            lam = lambda_k(self.full, k)
            if lam.hi >= 0.0:
                return ConditionResult("cond5", False, -1.0,
                                       f"mode {k} not stable over the range")
            qb, fb = _split_factored(self.nf, k)
            margin = lam.abs().lo - self._q_term(qb) - self._ratio_term(fb, k)
            worst = min(worst, margin)
        # uniform tail, normalized check at k0 = N+1 (increasing in k):
        # (mu_min k^2 - 1) C_bar^omega > env_d (K C_bar)^{n_env}
        env = self.nf.env_val
        k0 = self.N + 1
        mu_min = self.full.lo
        lhs_n = (mu_min * k0 * k0 - 1.0) * _pow_iv(self.Cbar.hi,
                                                   float(self.par.omega)).lo
        rhs_n = (env.d * _pow_iv(self.K, float(env.n))
                 * _pow_iv(self.Cbar.hi, float(env.n))).hi
        tail_margin = lhs_n - rhs_n
        worst = min(worst, tail_margin)
        if tail_margin <= 0.0:
            note = f"uniform tail fails at k = {k0}"
        return ConditionResult("cond5", worst > 0.0, worst, note)

    def _pre_scale(self) -> float:
        """Pre-bifurcation set scale: |lambda_b| capped at C_bar (ledgered)."""
        lam_pre = lambda_k(self.rng.pre(), self.b).abs()
        return min(lam_pre.hi, self.Cbar.hi)

    def cond6(self) -> ConditionResult:
        ob = self.nf.h_combo[self.b]
        D = self._pre_scale()
        if ob.n < 1:
            raise MonotonicityNotEstablished("bifurcation combo order < 1")
        term = (ob.d * _pow_iv(D, float(ob.n - 1))).hi
        margin = 2.0 - term
        return ConditionResult("cond6", margin > 0.0, margin)

    def cond7_spectrum(self) -> ConditionResult:
        """Standing premise: unstable modes positive, the rest negative."""
        worst = math.inf
        for k in self.unstable:
            worst = min(worst, lambda_k(self.full, k).lo)
        for k in self._stable_explicit():
            worst = min(worst, lambda_k(self.full, k).abs().lo)
        k0 = self.N + 1
        worst = min(worst, lambda_k(self.full, k0).abs().lo)
        mono_ok = self.full.lo * (k0 + 1) ** 2 > 1.0
        return ConditionResult("cond7_spectral_pattern",
                               worst > 0.0 and mono_ok, worst)

    def _cond_8_11(self, name: str, Cval: float) -> ConditionResult:
        if not self.unstable:
            return ConditionResult(name, True, math.inf,
                                   "no unstable directions besides the "
                                   "bifurcation mode")
        worst = math.inf
        for k in self.unstable:
            lam = lambda_k(self.post, k)
            margin = 2.0 * lam.lo - self._combo_eval(k, Cval) - self.par.l
            worst = min(worst, margin)
        return ConditionResult(name, worst > 0.0, worst)

    def cond8(self) -> ConditionResult:
        return self._cond_8_11("cond8", self._pre_scale())

    def _cond_9_12(self, name: str, Cval: float) -> ConditionResult:
        worst = math.inf
        for k in self._stable_explicit():
            lam = lambda_k(self.full, k)
            margin = 2.0 * lam.abs().lo - self._combo_eval(k, Cval) - self.par.l
            worst = min(worst, margin)
        k0 = self.N + 1
        lam = lambda_k(self.full, k0)
        margin = 2.0 * lam.abs().lo - self._combo_eval(k0, Cval) - self.par.l
        worst = min(worst, margin)
        # beyond k0: 2|lam_k| grows ~ mu k^4 while the combo grows ~ k; the
        # normalized check 2 mu_min k^3 - 2k > combo-coefficient holds from
        # k0+1 on once it holds there (cubic vs constant)
        kk = k0 + 1
        env_c = (self.nf.env_combo.d * _pow_iv(Cval, float(self.nf.env_combo.n))).hi
        tail = 2.0 * (self.full.lo * kk ** 3 - kk) - env_c - self.par.l / kk
        worst = min(worst, tail)
        return ConditionResult(name, worst > 0.0, worst)

    def cond9(self) -> ConditionResult:
        return self._cond_9_12("cond9", self._pre_scale())

    def _gamma_term(self, restricted: bool, order_kind: str) -> float:
        nf = self.nfr if restricted else self.nf
        if order_kind == "combo":
            ob = nf.h_combo[self.b]
            if ob.n < 2:
                raise MonotonicityNotEstablished("combo order < 2")
            lam_post = lambda_k(self.post, self.b)
            # beta C^{d}/lambda = d C^{n-2}/(-c); sup at C_bar
            return (ob.d * _pow_iv(self.Cbar.hi, float(ob.n - 2))
                    / Interval.point(self.c_abs.lo)).hi
        ob = nf.h_val[self.b]
        if ob.n < 3:
            raise MonotonicityNotEstablished("value order < 3")
        return (ob.d * _pow_iv(self.Cbar.hi, float(ob.n - 3))
                / Interval.point(self.c_abs.lo)).hi

    def cond10(self) -> ConditionResult:
        g = self.par.gamma_minus
        margin = (2.0 - 6.0 * g * g) - self._gamma_term(True, "combo")
        return ConditionResult("cond10", margin > 0.0, margin)

    def cond10p(self) -> ConditionResult:
        g = self.par.gamma_plus
        margin = -((2.0 - 6.0 * g * g) + self._gamma_term(False, "combo"))
        return ConditionResult("cond10p", margin > 0.0, margin)

    def cond11(self) -> ConditionResult:
        return self._cond_8_11("cond11", self.Cbar.hi)

    def cond12(self) -> ConditionResult:
        return self._cond_9_12("cond12", self.Cbar.hi)

    def gamma_plus_eff(self) -> float:
        term = self._gamma_term(False, "value")
        cap = 1.0 - max(term, 2.0 ** -16)
        return min(self.par.gamma_plus, cap)

    def cond13(self) -> ConditionResult:
        """gamma (1 - gamma^2) > alpha-term on [gamma-, gamma+_eff].

        gamma (1-gamma^2) is concave for gamma > 0 (second derivative
        -6 gamma < 0), so the minimum over an interval sits at an endpoint.
        """
        term = self._gamma_term(False, "value")
        worst = math.inf
        for g in (self.par.gamma_minus, self.gamma_plus_eff()):
            gi = Interval.point(g)
            val = (gi * (Interval.point(1.0) - gi * gi)).lo - term
            worst = min(worst, val)
        note = ""
        if self.gamma_plus_eff() < self.par.gamma_plus:
            note = (f"gamma+ = {self.par.gamma_plus} capped to "
                    f"{self.gamma_plus_eff():.6g} (above the fixed-point "
                    f"bracket); discrepancy recorded")
        return ConditionResult("cond13", worst > 0.0, worst, note)

    def cond14(self) -> ConditionResult:
        gm, gp = self.par.gamma_minus, self.par.gamma_plus
        coef = max(abs(2.0 - 6.0 * gm * gm), abs(2.0 - 6.0 * gp * gp))
        lam_post = lambda_k(self.post, self.b)
        ob = self.nf.h_combo[self.b]
        term = (ob.d * _pow_iv(self.Cbar.hi, float(ob.n))).hi
        margin = self.par.l / 4.0 - (coef * lam_post.hi + term)
        return ConditionResult("cond14", margin > 0.0, margin)

    # -- driver ----------------------------------------------------------

    def all_conditions(self):
        return [
            self.cond1(), self.cond2(), self.cond3_beta_premise(),
            self.cond4(), self.cond5(), self.cond6(), self.cond7_spectrum(),
            self.cond8(), self.cond9(), self.cond10(), self.cond10p(),
            self.cond11(), self.cond12(), self.cond13(), self.cond14(),
        ]


def check_condition(idx: int, nf, nfr, rng: ParamRange, params: BifParams):
    """Spec-style single-condition entry point, idx in 1..14."""
    checker = PitchforkChecker(nf, nfr, rng, params)
    conds = checker.all_conditions()
    if not (1 <= idx <= len(conds)):
        raise IntervalError(f"condition index {idx} out of range")
    c = conds[idx - 1]
    return c.passed, Interval.point(c.margin)


def verify_pitchfork(nf: NormalFormSystem, nfr: NormalFormSystem,
                     rng: ParamRange, params: BifParams) -> dict:
    """All fourteen checks (never short-circuited) plus summary data."""
    checker = PitchforkChecker(nf, nfr, rng, params)
    conds = checker.all_conditions()
    cbar = checker.Cbar
    kstar = checker.K_star()
    overall = all(c.passed for c in conds)
    return {
        "pass": overall,
        "conditions": [c.to_json_dict() for c in conds],
        "C_bar": [cbar.lo, cbar.hi],
        "K_cond2": checker.K,
        "K_star": [kstar.lo, kstar.hi],
        "c_mu": [nf.c_mu.lo, nf.c_mu.hi],
        "unstable_modes": list(checker.unstable),
        "gamma_plus_eff": checker.gamma_plus_eff(),
        "g_arg_max": nf.g_arg_max,
        "value_table": [[k, d, n] for k, d, n in nf.value_table()],
        "deriv_table": [[k, d, n] for k, d, n in nf.deriv_table()],
    }
