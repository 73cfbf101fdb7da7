"""Cone-condition and logarithmic-norm verification over tailed cuboids.

The certified quantities are Gershgorin-style row margins of the symmetrized
conjugated Jacobian family over a cuboid V:

    Gamma_i = 2 inf |dF~_i/dx_i|  -  sum_{j != i} sup |Q_jj dF~_j/dx_i
                                                       + Q_ii dF~_i/dx_j|

with F~ = A o F o A^{-1} for a linear change acting on the first m modes.
Rows/columns beyond the explicit head are controlled by the S(l) and K(l,n)
sums; a cubic-growth criterion certifies all far rows beyond a finite
cutoff.  The max-norm logarithmic norm uses the same machinery with rows
only.  Finite-dimensional variants back the toy models.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cuboid import TailedCuboid, face, FaceId
from .interval import (
    Interval,
    IntervalError,
    IntervalMatrix,
    enclose_inverse,
    isum,
)
from . import ks_field as kf


class CutoffNotFound(IntervalError):
    pass


class TailNotEventuallyNegative(IntervalError):
    pass


class FaceNotInward(IntervalError):
    pass


@dataclass(frozen=True)
class ConeSpec:
    m: int                      # unstable block size (Q_ii = +1 for i <= m)
    central: tuple = ()         # central mode indices (disk-image variant)

    def sign(self, i: int) -> int:
        if i in self.central:
            return -1
        return +1 if i <= self.m else -1


@dataclass
class ConeVerdict:
    passed: bool
    lambda_margin: Interval
    per_mode: list
    tail_cutoff: int
    note: str = ""

    def to_json_dict(self):
        return {
            "pass": self.passed,
            "lambda_margin": [self.lambda_margin.lo, self.lambda_margin.hi],
            "per_mode_lower": [g.lo for g in self.per_mode],
            "tail_cutoff": self.tail_cutoff,
            "note": self.note,
        }


# ---------------------------------------------------------------------------
# Finite-dimensional helpers (toy models, explicit head blocks)
# ---------------------------------------------------------------------------

def pair_sup(J: IntervalMatrix, qi: int, qj: int, i: int, j: int) -> float:
    """sup |q_j J_ji + q_i J_ij| over the matrix family (0-based indices)."""
    comb = Interval.point(float(qj)) * J[j, i] + Interval.point(float(qi)) * J[i, j]
    return comb.abs().hi


def gamma_margins_finite(J: IntervalMatrix, signs) -> list:
    """Row margins for the diagonal-dominance cone condition, 0-based.

    margin_i = 2 inf(q_i J_ii) - sum_{j != i} sup|q_j J_ji + q_i J_ij|;
    inf(q_i J_ii) <= 0 flags a sign-inconsistent diagonal and the margin
    goes nonpositive automatically.
    """
    n = J.rows
    out = []
    for i in range(n):
        qi = signs[i]
        diag = Interval.point(float(qi)) * J[i, i]
        acc = Interval.point(2.0 * diag.lo)
        for j in range(n):
            if j != i:
                acc = acc - Interval.point(pair_sup(J, qi, signs[j], i, j))
        out.append(acc)
    return out


def central_margins_finite(J: IntervalMatrix, signs, central) -> tuple:
    """(margins for non-central rows, margins for central rows)."""
    n = J.rows
    strong, central_rows = [], []
    for i in range(n):
        qi = signs[i]
        diag = Interval.point(float(qi)) * J[i, i]
        acc = Interval.point(2.0 * diag.lo)
        for j in range(n):
            if j != i:
                acc = acc - Interval.point(pair_sup(J, qi, signs[j], i, j))
        (central_rows if i in central else strong).append(acc)
    return strong, central_rows


def lognorm_rows_finite(J: IntervalMatrix) -> float:
    """Upper bound for the max-norm logarithmic norm of every matrix in J."""
    worst = -float("inf")
    for i in range(J.rows):
        row = Interval.point(J[i, i].hi)
        for j in range(J.cols):
            if j != i:
                row = row + J[i, j].abs()
        worst = max(worst, row.hi)
    return worst


def lognorm_l2_finite(J: IntervalMatrix) -> float:
    """Upper bound for the l2 logarithmic norm of every point matrix in J.

    2x2 uses the exact symmetric eigenvalue formula; larger sizes fall back
    to Gershgorin on the symmetrized family.
    """
    from .interval import sym_eig_upper

    n = J.rows
    sym = IntervalMatrix(n, n)
    half = Interval.point(0.5)
    for i in range(n):
        for j in range(n):
            sym[i, j] = (J[i, j] + J[j, i]) * half
    if n == 2:
        return sym2x2_eig_bounds(sym[0, 0], sym[1, 1], sym[0, 1])[1].hi
    return sym_eig_upper(sym)


def _eig2(a: float, d: float, b: float, want_max: bool) -> Interval:
    ai, di, bi = Interval.point(a), Interval.point(d), Interval.point(b)
    half = Interval.point(0.5)
    mean = (ai + di) * half
    root = (((ai - di) * half).pow_int(2) + bi.pow_int(2)).sqrt()
    return mean + root if want_max else mean - root


def sym2x2_eig_bounds(a: Interval, d: Interval, b: Interval):
    """(lambda_min, lambda_max) enclosures for symmetric [[a, b], [b, d]].

    lambda_min/max are monotone increasing in a and d; lambda_min decreases
    and lambda_max increases in |b|, so corner evaluation avoids the
    interval dependence of the naive formula.
    """
    bmag, bmig = b.mag(), b.mig()
    lo_min = _eig2(a.lo, d.lo, bmag, want_max=False).lo
    hi_min = _eig2(a.hi, d.hi, bmig, want_max=False).hi
    lo_max = _eig2(a.lo, d.lo, bmig, want_max=True).lo
    hi_max = _eig2(a.hi, d.hi, bmag, want_max=True).hi
    return Interval(lo_min, max(lo_min, hi_min)), Interval(min(lo_max, hi_max), hi_max)


def symmetrized_Q_form(J: IntervalMatrix, signs) -> IntervalMatrix:
    """A = (DF)^T Q + Q DF for the diagonal sign matrix Q."""
    n = J.rows
    a = IntervalMatrix(n, n)
    for i in range(n):
        for j in range(n):
            a[i, j] = (J[j, i] * Interval.point(float(signs[j]))
                       + Interval.point(float(signs[i])) * J[i, j])
    return a


def mineig_lower_sym(A: IntervalMatrix) -> float:
    """Lower bound for lambda_min over every symmetric point matrix in A.

    Uses the exact 2x2 formula; for 3x3 takes the best over the three
    (2-block + scalar) splits combined through the Courant-Fischer
    reduction lambda_min >= mineig2x2([[alpha, -gamma], [-gamma, beta]])
    with alpha the block bound and gamma a cross-norm bound; otherwise
    Gershgorin rows.
    """
    n = A.rows
    if n == 1:
        return A[0, 0].lo
    if n == 2:
        return sym2x2_eig_bounds(A[0, 0], A[1, 1], A[0, 1])[0].lo

    def gersh():
        worst = float("inf")
        for i in range(n):
            row = Interval.point(A[i, i].lo)
            for j in range(n):
                if j != i:
                    row = row - A[i, j].abs()
            worst = min(worst, row.lo)
        return worst

    best = gersh()
    if n == 3:
        for k in range(3):
            rest = [i for i in range(3) if i != k]
            alpha = sym2x2_eig_bounds(A[rest[0], rest[0]], A[rest[1], rest[1]],
                                      A[rest[0], rest[1]])[0]
            beta = A[k, k]
            gam = (A[rest[0], k].pow_int(2) + A[rest[1], k].pow_int(2)).sqrt()
            cand = sym2x2_eig_bounds(alpha, beta, gam)[0].lo
            best = max(best, cand)
    return best


# ---------------------------------------------------------------------------
# Conjugated KS field over a tailed cuboid
# ---------------------------------------------------------------------------

class ConjugatedField:
    """Caches dF~ entries and S/K sums for one (cuboid, mu, A) triple.

    A acts on modes 1..m only; A = None means the identity.  All public
    entries/sums are rigorous enclosures over the cuboid.
    """

    def __init__(self, v: TailedCuboid, mu: Interval, m: int,
                 A: IntervalMatrix | None = None):
        self.v = v
        self.mu = mu
        self.m = m
        self.M = v.M
        if A is None:
            A = IntervalMatrix.identity(m)
        if A.rows != m or A.cols != m:
            raise IntervalError("A must be m x m")
        self.A = A
        self.Ainv = enclose_inverse(A) if m > 0 else IntervalMatrix(0, 0)
        self._raw = {}
        self._conj = {}
        self._S = {}
        self._K = {}
        # Atilde_{jk} = |A_{jk}| k
        at = IntervalMatrix(m, m)
        for j in range(m):
            for k in range(m):
                at[j, k] = A[j, k].abs() * Interval.point(float(k + 1))
        self.atilde_norm1 = at.norm_1_upper()
        self.ainv_norm_inf = self.Ainv.norm_inf_upper()

    # raw and conjugated entries (1-based mode indices)

    def raw(self, i: int, j: int) -> Interval:
        key = (i, j)
        if key not in self._raw:
            self._raw[key] = kf.dF_entry(self.v, self.mu, i, j)
        return self._raw[key]

    def entry(self, i: int, j: int) -> Interval:
        key = (i, j)
        if key in self._conj:
            return self._conj[key]
        m = self.m
        if i <= m and j <= m:
            acc = isum(self.A[i - 1, k] * self.raw(k + 1, l + 1) * self.Ainv[l, j - 1]
                       for k in range(m) for l in range(m))
        elif i <= m:
            acc = isum(self.A[i - 1, k] * self.raw(k + 1, j) for k in range(m))
        elif j <= m:
            acc = isum(self.raw(i, l + 1) * self.Ainv[l, j - 1] for l in range(m))
        else:
            acc = self.raw(i, j)
        self._conj[key] = acc
        return acc

    def S(self, l: int) -> Interval:
        l = max(l, 1)
        if l not in self._S:
            self._S[l] = kf.S_bound(l, self.v)
        return self._S[l]

    def K(self, l: int, n: int) -> Interval:
        key = (l, n)
        if key not in self._K:
            self._K[key] = kf.K_bound(l, n, self.v)
        return self._K[key]

    # tail sums of rows/columns beyond the explicit head

    def row_tail(self, i: int) -> Interval:
        """sum_{j > M} sup |dF~_i/dx_j|."""
        m, M = self.m, self.M
        if i <= m:
            return isum(Interval.point(2.0 * (k + 1)) * self.A[i - 1, k].abs()
                        * (self.S(M + 1 - (k + 1)) + self.S(M + 1 + (k + 1)))
                        for k in range(m))
        return Interval.point(2.0 * i) * (self.S(M + 1 - i) + self.S(M + 1 + i))

    def col_tail(self, i: int) -> Interval:
        """sum_{j > M} sup |dF~_j/dx_i|."""
        m, M = self.m, self.M
        if i <= m:
            return Interval.point(2.0) * isum(
                self.Ainv[k, i - 1].abs() * (self.K(M + 1, -(k + 1)) + self.K(M + 1, k + 1))
                for k in range(m))
        return Interval.point(2.0) * (self.K(M + 1, -i) + self.K(M + 1, i))


def conjugated_derivative_bounds(v: TailedCuboid, mu: Interval, m: int,
                                 A: IntervalMatrix | None, i: int, j: int) -> Interval:
    """Enclosure of dF~_i/dx_j over the cuboid (spec op)."""
    return ConjugatedField(v, mu, m, A).entry(i, j)


def _far_snd(cf: ConjugatedField, i: int) -> Interval:
    """S_ND bound for far rows i > M (cone-condition version)."""
    m = cf.m
    t1 = (Interval.point(2.0) * cf.atilde_norm1
          + Interval.point(2.0 * i) * cf.ainv_norm_inf) * (cf.S(i - m) + cf.S(i + 1))
    t2 = Interval.point(2.0 * i) * cf.S(i + m + 1)
    t3 = Interval.point(8.0 * i - 2.0) * cf.S(1)
    t4 = Interval.point(2.0) * (cf.K(m + 1, i) + cf.K(1, 0))
    return t1 + t2 + t3 + t4


def gamma_lower_bound(v: TailedCuboid, mu: Interval, spec: ConeSpec, i: int,
                      A: IntervalMatrix | None = None,
                      cf: ConjugatedField | None = None) -> Interval:
    """Certified lower bound for the diagonal-dominance margin of mode i."""
    if cf is None:
        cf = ConjugatedField(v, mu, spec.m, A)
    M = cf.M
    if i > M:
        lam = kf.lambda_k(mu, i)
        return Interval.point(2.0 * lam.abs().lo) - _far_snd(cf, i)
    qi = spec.sign(i)
    diag = Interval.point(float(qi)) * cf.entry(i, i)
    acc = Interval.point(2.0 * diag.lo)
    for j in range(1, M + 1):
        if j == i:
            continue
        qj = spec.sign(j)
        comb = (Interval.point(float(qj)) * cf.entry(j, i)
                + Interval.point(float(qi)) * cf.entry(i, j))
        acc = acc - Interval.point(comb.abs().hi)
    acc = acc - cf.row_tail(i) - cf.col_tail(i)
    return acc


def _f_of_n(cf: ConjugatedField, n: int) -> Interval:
    m = cf.m
    ninv = Interval.point(1.0) / Interval.point(float(n))
    t1 = (Interval.point(2.0) * cf.atilde_norm1 * ninv
          + Interval.point(2.0) * cf.ainv_norm_inf) * (cf.S(n - m) + cf.S(n + 1))
    t2 = Interval.point(2.0) * cf.S(n + m + 1)
    t3 = Interval.point(8.0) * cf.S(1)
    t4 = Interval.point(2.0) * ninv * (cf.K(m + 1, n) + cf.K(1, 0))
    return t1 + t2 + t3 + t4


def tail_positivity_cutoff(v: TailedCuboid, mu: Interval, spec: ConeSpec,
                           search_limit: int,
                           A: IntervalMatrix | None = None,
                           cf: ConjugatedField | None = None) -> int:
    """Smallest n > M with 2(mu n^3 - n) > f(n); covers all i >= n."""
    if mu.lo <= 0.0:
        raise IntervalError("mu must be positive")
    if cf is None:
        cf = ConjugatedField(v, mu, spec.m, A)
    for n in range(cf.M + 1, search_limit + 1):
        ni = Interval.point(float(n))
        lhs = Interval.point(2.0) * (mu * ni.pow_int(3) - ni)
        if lhs.lo > _f_of_n(cf, n).hi:
            return n
    raise CutoffNotFound(f"criterion not certified up to n = {search_limit}")


def verify_cone_conditions(v: TailedCuboid, mu: Interval, spec: ConeSpec,
                           A: IntervalMatrix | None = None,
                           search_limit: int | None = None,
                           jobs: int = 1) -> ConeVerdict:
    """Certify Gamma_i >= lambda > 0 for every i (explicit head + far tail)."""
    if spec.central:
        raise IntervalError("use verify_central_cones for central specs")
    cf = ConjugatedField(v, mu, spec.m, A)
    limit = search_limit or 16 * max(cf.M, 2)
    try:
        cutoff = tail_positivity_cutoff(v, mu, spec, limit, cf=cf)
    except CutoffNotFound as exc:
        return ConeVerdict(False, Interval.point(-1.0), [], -1,
                           note=f"tail cutoff not found: {exc}")
    idxs = list(range(1, cutoff + 1))
    margins = _map_indexed(
        lambda i: gamma_lower_bound(v, mu, spec, i, cf=cf), idxs, jobs)
    worst = min(margins, key=lambda g: g.lo)
    passed = worst.lo > 0.0
    return ConeVerdict(passed, Interval.point(worst.lo), margins, cutoff)


def verify_central_cones(v: TailedCuboid, mu: Interval, spec: ConeSpec,
                         lam: float,
                         A: IntervalMatrix | None = None,
                         search_limit: int | None = None,
                         jobs: int = 1) -> ConeVerdict:
    """Disk-image variant: strong rows >= lam, central rows >= -lam/4."""
    if not spec.central:
        raise IntervalError("central set must be nonempty")
    if lam <= 0.0:
        return ConeVerdict(False, Interval.point(0.0), [], -1,
                           note="lambda must be positive")
    cf = ConjugatedField(v, mu, spec.m, A)
    limit = search_limit or 16 * max(cf.M, 2)
    try:
        cutoff = tail_positivity_cutoff(v, mu, spec, limit, cf=cf)
    except CutoffNotFound as exc:
        return ConeVerdict(False, Interval.point(-1.0), [], -1,
                           note=f"tail cutoff not found: {exc}")
    idxs = list(range(1, cutoff + 1))
    margins = _map_indexed(
        lambda i: gamma_lower_bound(v, mu, spec, i, cf=cf), idxs, jobs)
    ok = True
    for i, g in zip(idxs, margins):
        if i in spec.central:
            ok = ok and (g.lo >= -lam / 4.0)
        else:
            ok = ok and (g.lo >= lam)
    worst = min(margins, key=lambda g: g.lo)
    return ConeVerdict(ok, Interval.point(worst.lo), margins, cutoff)


# ---------------------------------------------------------------------------
# Logarithmic norm (max norm) over a cuboid
# ---------------------------------------------------------------------------

def _far_lognorm_row(cf: ConjugatedField, i: int, mu: Interval) -> Interval:
    m = cf.m
    lam = kf.lambda_k(mu, i)
    snd = (Interval.point(2.0 * i) * cf.ainv_norm_inf * (cf.S(i - m) + cf.S(i + 1))
           + Interval.point(2.0 * i) * cf.S(i + m + 1)
           + Interval.point(4.0 * i) * cf.S(1))
    return Interval.point(lam.hi) + snd


def _split_cuboid(v: TailedCuboid, head_splits) -> list:
    """Product subdivision of selected head modes (log norms are pointwise
    suprema, so the maximum over the parts bounds the whole)."""
    if not head_splits:
        return [v]
    cubs = [v]
    for mode, parts in head_splits:
        new = []
        for c in cubs:
            iv = c.mode(mode)
            step = (iv.hi - iv.lo) / parts
            for i in range(parts):
                lo = iv.lo + i * step
                hi = iv.hi if i == parts - 1 else iv.lo + (i + 1) * step
                new.append(c.with_mode(mode, Interval(lo, hi)))
        cubs = new
    return cubs


def block_lognorm_upper(v: TailedCuboid, mu: Interval, m: int,
                        A: IntervalMatrix | None = None,
                        head_splits=()) -> float:
    """Max-norm log norm of the conjugated m-block rows only."""
    worst = -float("inf")
    for sub in _split_cuboid(v, head_splits):
        cf = ConjugatedField(sub, mu, m, A)
        for i in range(1, m + 1):
            row = Interval.point(cf.entry(i, i).hi)
            for j in range(1, m + 1):
                if j != i:
                    row = row + Interval.point(cf.entry(i, j).abs().hi)
            worst = max(worst, row.hi)
    return worst


def lognorm_upper_bound(v: TailedCuboid, mu: Interval, m: int,
                        A: IntervalMatrix | None = None,
                        search_limit: int | None = None,
                        jobs: int = 1, head_splits=()) -> Interval:
    """Upper bound l for the max-norm logarithmic norm of DF~ over the cuboid."""
    cf = ConjugatedField(v, mu, m, A)
    M = cf.M
    limit = search_limit or 16 * max(M, 2)

    def head_row_at(cf_, i: int) -> Interval:
        row = Interval.point(cf_.entry(i, i).hi)
        for j in range(1, M + 1):
            if j != i:
                row = row + Interval.point(cf_.entry(i, j).abs().hi)
        return row + cf_.row_tail(i)

    # rows touching the conjugated block benefit from subdivision; the
    # strongly dissipative rows beyond m are evaluated on the full cuboid
    worst = -float("inf")
    for sub in _split_cuboid(v, head_splits):
        cf_sub = ConjugatedField(sub, mu, m, A) if head_splits else cf
        for i in range(1, m + 1):
            worst = max(worst, head_row_at(cf_sub, i).hi)
    rows = _map_indexed(lambda i: head_row_at(cf, i),
                        list(range(m + 1, M + 1)), jobs)
    for r in rows:
        worst = max(worst, r.hi)
    n_ok = None
    far = None
    for n in range(M + 1, limit + 1):
        far = _far_lognorm_row(cf, n, mu)
        if far.hi < 0.0:
            n_ok = n
            break
        worst = max(worst, far.hi)
    if n_ok is None:
        raise TailNotEventuallyNegative(
            f"far log-norm rows not certified negative up to {limit}")
    worst = max(worst, far.hi)
    return Interval.point(worst)


def verify_attracting_basin(v: TailedCuboid, mu: Interval, m: int,
                            A: IntervalMatrix | None = None,
                            jobs: int = 1) -> dict:
    """Theorem-style basin check: inward faces + negative max-norm log norm.

    Returns a certificate fragment; raises FaceNotInward with the offending
    face when the isolation inequalities fail.
    """
    M = v.M
    face_margins = []
    for k in range(1, M + 1):
        up = kf.eval_F_head(face(v, FaceId(k, +1)), mu, k)
        dn = kf.eval_F_head(face(v, FaceId(k, -1)), mu, k)
        if not (up.hi < 0.0):
            raise FaceNotInward(f"mode {k} upper face: F_k = {up}")
        if not (dn.lo > 0.0):
            raise FaceNotInward(f"mode {k} lower face: F_k = {dn}")
        face_margins.append(min(-up.hi, dn.lo))
    # tail faces M < k <= 2M: |lambda_k| D/k^s must beat the N_k enclosure
    D = v.tail_C
    for k in range(M + 1, 2 * M + 1):
        lam = kf.lambda_k(mu, k)
        if lam.hi >= 0.0:
            raise FaceNotInward(f"tail mode {k} not dissipative: lambda = {lam}")
        amp = Interval.point(D) / kf._pow_iv(float(k), v.tail_s)
        drive = kf.eval_N_head(v, k).abs().hi
        margin = (lam.abs() * amp - Interval.point(drive)).lo
        if not (margin > 0.0):
            raise FaceNotInward(f"tail mode {k}: |lambda| D/k^s = "
                                f"{(lam.abs()*amp).lo} vs |N_k| <= {drive}")
        face_margins.append(margin)
    # beyond 2M: normalized criterion D(mu k^2 - 1) k^2 / k^2 ... checked at
    # k0 = 2M+1; LHS*k^{s-2} increases and RHS*k^{s-2} decreases in k
    k0 = 2 * M + 1
    lam0 = kf.lambda_k(mu, k0)
    if lam0.hi >= 0.0:
        raise FaceNotInward(f"far tail mode {k0} not dissipative")
    amp0 = Interval.point(D) / kf._pow_iv(float(k0), v.tail_s)
    drive0 = (kf.tildeN_value_bound(k0, v) + kf.is_tail_bound(k0, v)
              + kf.fs_tail_bound(k0, v))
    far_margin = (lam0.abs() * amp0 - drive0).lo
    if not (far_margin > 0.0):
        raise FaceNotInward(f"far tail criterion fails at k = {k0}")
    l = lognorm_upper_bound(v, mu, m, A, jobs=jobs)
    return {
        "pass": bool(l.hi < 0.0),
        "lognorm_upper": l.hi,
        "min_face_margin": min(face_margins),
        "far_tail_margin": far_margin,
        "cuboid": v.to_json_dict(),
    }


# ---------------------------------------------------------------------------

def _map_indexed(fn, idxs, jobs: int):
    """Map preserving order; thread pool when jobs > 1 (deterministic)."""
    if jobs <= 1 or len(idxs) < 4:
        return [fn(i) for i in idxs]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, idxs))
