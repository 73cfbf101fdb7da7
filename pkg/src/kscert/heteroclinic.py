"""Heteroclinic connections: source cone cuboid, target basin, propagation.

The source cuboid is verified in the normal-form coordinates produced by
the removal pipeline (no linear conjugation certifies the cone condition on
a connection-sized cuboid in raw coordinates: the antisymmetric part of the
quadratic coupling is invariant under any linear change).  Its positive
exit face is mapped to Fourier coordinates through the explicit polynomial
variable map and propagated by a componentwise variation-of-constants step

    a_k(h) in e^{lam_k h} A_k + h phi1(lam_k h) N_k(A) + h^2 phi2(lam_k h) W_k(Z)

over a verified step box Z, where W encloses dN/dt.  This is the scalar
log-norm contraction lemma applied per mode (linear rate as l, coupling as
defect), handles the stiff tail modes exactly, and stays first order with
one-step boxes (no coordinate tracking).  Tail modes beyond the explicit
head ride a static envelope D/k^s whose faces are verified inward over the
working region.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import ks_field as kf
from .cone_lognorm import lognorm_upper_bound, verify_attracting_basin, FaceNotInward
from .cuboid import TailedCuboid
from .interval import Interval, IntervalError, IntervalMatrix, phi1, phi2
from .normal_form import ks_pipeline, DEFAULT_REMOVALS_MU1, Poly, mono


class ConeVerificationFailed(IntervalError):
    pass


class BasinNotFound(IntervalError):
    pass


class EnclosureEscapedRegion(IntervalError):
    pass


class StepSizeTooLarge(IntervalError):
    pass


# connection-mu removal list: the mu~1 set plus the -6 b1 b2 remnant, which
# otherwise dominates the pair terms at connection-sized b1 slots
CONNECTION_REMOVALS = DEFAULT_REMOVALS_MU1


# ---------------------------------------------------------------------------
# Source cuboid (normal-form coordinates)
# ---------------------------------------------------------------------------

@dataclass
class SourceResult:
    nf: object                  # NormalFormSystem at the connection mu
    cuboid: TailedCuboid        # b-coordinate cuboid (head N modes)
    A: IntervalMatrix           # identity (diagonalization is the nonlinear map)
    margins: list
    far_margin: float
    lambda_margin: float
    bif_scale: float


def build_source_cuboid(mu: Interval, M_pipeline: int, seed_radius: float,
                        s: float = 6.0, p: float = 4.0, omega: int = 3,
                        zeta: float = 1.2, removals=CONNECTION_REMOVALS,
                        max_retries: int = 20) -> SourceResult:
    """Cone-verified cuboid around 0 for the transformed field.

    The cuboid is the pipeline shape with the bifurcation slot set to
    seed_radius; on failure the radius halves, up to max_retries.
    """
    lam1 = kf.lambda_k(mu, 1)
    if lam1.lo <= 0.0:
        raise ConeVerificationFailed(
            f"origin has no unstable direction at mu = {mu} "
            f"(lambda_1 = {lam1}); wrong stability pattern")
    # C(mu) for the shape scale, from the resonance mode
    lam2 = kf.lambda_k(mu, 2)
    C_est = ((lam1 * lam2.abs()) / Interval.point(4.0)).sqrt()
    C = Interval(0.0, C_est.hi)
    radius = seed_radius
    last = None
    for _ in range(max_retries + 1):
        bif_scale = radius / (zeta * C.hi)
        nf = ks_pipeline(mu, M_pipeline, s, p, omega, zeta, 1, C, removals,
                         bif_scale=bif_scale)
        margins, far = nf.system.cone_margins(unstable=(1,))
        worst = min(g.lo for g in margins)
        ok = worst > 0.0 and far.lo > 0.0
        if ok:
            shape = nf.system.shape
            head = []
            for k in range(1, nf.N + 1):
                r = shape.slot(k).eval().hi
                head.append(Interval(-r, r))
            cub = TailedCuboid(tuple(head), C.hi ** omega, s)
            return SourceResult(nf, cub, IntervalMatrix.identity(M_pipeline),
                                margins, far.lo, worst, bif_scale)
        last = (worst, far.lo)
        radius *= 0.5
    raise ConeVerificationFailed(
        f"cone conditions failed after {max_retries} shrinks; "
        f"last margins {last}")


def source_exit_face_box(src: SourceResult, Mp: int):
    """Fourier-coordinate box enclosing the positive-b1 exit face.

    Head modes 1..N map through the polynomial variable map; modes
    N+1..Mp carry the shape tail slots; beyond Mp the face inherits the
    C^omega/k^s envelope.
    """
    nf = src.nf
    N = nf.N
    shape = nf.system.shape
    box = {}
    for v in range(1, N + 1):
        r = shape.slot(v).eval().hi
        box[v] = Interval(-r, r)
    box[1] = Interval.point(shape.slot(1).eval().hi)   # the exit face
    out = []
    for v in range(1, N + 1):
        out.append(nf.system.var_map[v].eval_box(box))
    for v in range(N + 1, Mp + 1):
        r = src.cuboid.tail_C / v ** src.cuboid.tail_s
        out.append(Interval(-r, r))
    return out, src.cuboid.tail_C, src.cuboid.tail_s


# ---------------------------------------------------------------------------
# Target basin
# ---------------------------------------------------------------------------

def galerkin_field_np(mu_mid: float, a: np.ndarray) -> np.ndarray:
    n = len(a)
    out = np.empty(n)
    for k in range(1, n + 1):
        lam = k * k * (1.0 - mu_mid * k * k)
        fs = sum(a[i - 1] * a[k - i - 1] for i in range(1, k))
        is_ = sum(a[i - 1] * a[k + i - 1] for i in range(1, n - k + 1))
        out[k - 1] = lam * a[k - 1] - k * fs + 2 * k * is_
    return out


def galerkin_nonlinear_np(mu_mid: float, a: np.ndarray) -> np.ndarray:
    n = len(a)
    out = np.empty(n)
    for k in range(1, n + 1):
        fs = sum(a[i - 1] * a[k - i - 1] for i in range(1, k))
        is_ = sum(a[i - 1] * a[k + i - 1] for i in range(1, n - k + 1))
        out[k - 1] = -k * fs + 2 * k * is_
    return out


def galerkin_jac_np(mu_mid: float, a: np.ndarray) -> np.ndarray:
    n = len(a)
    jac = np.zeros((n, n))
    pad = np.zeros(2 * n + 2)
    pad[1:n + 1] = a
    for k in range(1, n + 1):
        for j in range(1, n + 1):
            v = 0.0
            if k > j:
                v -= pad[k - j]
            if j > k:
                v += pad[j - k]
            v += pad[k + j] if k + j <= 2 * n + 1 else 0.0
            jac[k - 1, j - 1] = 2 * k * v
        jac[k - 1, k - 1] += k * k * (1.0 - mu_mid * k * k)
    return jac


def newton_fixed_point(mu_mid: float, seed: np.ndarray, iters: int = 40):
    a = seed.copy()
    for _ in range(iters):
        f = galerkin_field_np(mu_mid, a)
        j = galerkin_jac_np(mu_mid, a)
        a = a - np.linalg.solve(j, f)
    return a


@dataclass
class BasinResult:
    cuboid: TailedCuboid        # axis enclosure of the verified set
    A: IntervalMatrix
    lognorm: float
    m: int
    center: np.ndarray
    radius: float
    defect: float
    fragment: dict
    middle_rho: np.ndarray = None

    def contains_box(self, lo: np.ndarray, hi: np.ndarray,
                     tail_C: float, tail_s: float) -> bool:
        """Is the axis box (plus tail family) inside the attracting set?"""
        Mp = len(self.center)
        if len(lo) != Mp:
            return False
        mid = 0.5 * (lo + hi)
        rad = 0.5 * (hi - lo)
        m = self.m
        A = np.array([[self.A[i, j].mid for j in range(m)] for i in range(m)])
        dev = mid[:m] - self.center[:m]
        ball = np.abs(A @ dev) + np.abs(A) @ rad[:m]
        ball *= 1.0 + 1e-12
        if ball.max() >= self.radius:
            return False
        rest = np.abs(mid[m:] - self.center[m:]) + rad[m:]
        if rest.size and np.any(rest >= self.middle_rho):
            return False
        if tail_s != self.cuboid.tail_s:
            return False
        return tail_C <= self.cuboid.tail_C * (1 + 1e-12)


def _tail_faces_ok(cub: TailedCuboid, mu: Interval):
    """Inwardness of the D/k^s envelope faces over the cuboid (k > M)."""
    Mp = cub.M
    for k in range(Mp + 1, 2 * Mp + 1):
        lam = kf.lambda_k(mu, k)
        if lam.hi >= 0.0:
            raise FaceNotInward(f"tail mode {k} not dissipative")
        amp = cub.tail_C / float(k) ** cub.tail_s
        drive = kf.eval_N_head(cub, k).abs().hi
        if not (lam.abs().lo * amp > drive):
            raise FaceNotInward(
                f"tail face {k}: |lambda| D/k^s = {lam.abs().lo * amp:.3e}"
                f" <= drive {drive:.3e}")
    k0 = 2 * Mp + 1
    lam0 = kf.lambda_k(mu, k0)
    amp0 = cub.tail_C / float(k0) ** cub.tail_s
    drive0 = (kf.tildeN_value_bound(k0, cub).hi
              + kf.is_tail_bound(k0, cub).hi + kf.fs_tail_bound(k0, cub).hi)
    if not (lam0.abs().lo * amp0 > drive0):
        raise FaceNotInward(f"far tail criterion fails at k = {k0}")
    # beyond k0 the normalized margin D(mu k^2 - 1) vs the k^{2-s}-scaled
    # drives is monotone increasing (see the tail lemmas)


def build_target_basin(mu: Interval, approx_point, Mp: int,
                       m: int = 8, s_tail: float = 12.0,
                       rho_grid=(0.04, 0.02, 0.06, 0.1),
                       tail_grid=(1e8, 1e10, 1e12, 1e14),
                       jobs: int = 1) -> BasinResult:
    """Attracting set around the Newton-refined target fixed point.

    R = { ||A (a - x)_{1..m}||_inf <= r }
        x  prod_{m<k<=Mp} [x_k - rho_k, x_k + rho_k]  x  tail envelope.

    Verified pieces: (i) the m-block ball contracts: block row log norm
    l_blk < 0 over the axis enclosure V and the inhomogeneity
    delta = sup ||A F_{1..m}(x_m-point, middle band, tail)||_inf satisfies
    delta < |l_blk| r; (ii) every middle face is inward; (iii) the tail
    envelope faces are inward; (iv) the full max-norm log norm over V is
    negative (reported, and gives the attraction rate).
    """
    seed = np.zeros(Mp)
    pts = list(approx_point)
    seed[:len(pts)] = pts
    center = newton_fixed_point(mu.mid, seed)
    if abs(center[0]) < 1e-8:
        raise BasinNotFound("Newton converged to the origin; the origin is "
                            "not attracting on the post-bifurcation side")
    jac = galerkin_jac_np(mu.mid, center)
    w, vecs = np.linalg.eig(jac[:m, :m])
    if np.iscomplexobj(w) and np.abs(w.imag).max() > 1e-12:
        raise BasinNotFound("complex eigenpairs in the head block are out "
                            "of scope for this artifact")
    # extent-shaped eigenbasis: the ball radius r is the slow-direction
    # extent; faster eigendirections get extents shrunk like 1/sqrt of the
    # rate ratio, which damps their interval pickup in the slow row
    mags = np.abs(w.real)
    weights = np.minimum((mags / mags.min()) ** 0.5, 20.0)
    A_np = np.diag(weights) @ np.linalg.inv(vecs.real)
    A = IntervalMatrix.from_floats(A_np.tolist())
    Ainv_np = np.linalg.inv(A_np)
    Ainv_rowsums = np.abs(Ainv_np) @ np.ones(m)
    last_exc = None
    for r in rho_grid:
        for D in tail_grid:
            try:
                res = _try_basin(mu, center, A, Ainv_rowsums, r, D,
                                 Mp, m, s_tail, jobs)
            except (FaceNotInward, IntervalError) as exc:
                last_exc = exc
                continue
            if res is not None:
                return res
    raise BasinNotFound(f"no (radius, tail) candidate verified: {last_exc}")


def _try_basin(mu, center, A, Ainv_rowsums, r, D, Mp, m, s_tail, jobs):
    # middle-band radii: fixed-point iterate rho_k ~ 2 sup|N_k| / |lambda_k|
    rho = np.array([r / (k * k) for k in range(m + 1, Mp + 1)])
    lam_mid = [kf.lambda_k(mu, k) for k in range(m + 1, Mp + 1)]
    for lam in lam_mid:
        if lam.hi >= 0.0:
            raise FaceNotInward("middle mode not dissipative")

    def enclosure(rho_now):
        head = []
        for k in range(1, m + 1):
            pad = Ainv_rowsums[k - 1] * r
            head.append(Interval(center[k - 1] - pad, center[k - 1] + pad))
        for k in range(m + 1, Mp + 1):
            pad = rho_now[k - m - 1]
            head.append(Interval(center[k - 1] - pad, center[k - 1] + pad))
        return TailedCuboid(tuple(head), D, s_tail)

    lam_lo = np.array([l.abs().lo for l in lam_mid])
    rho = np.full(Mp - m, 1e-10)
    for _ in range(12):
        cub = enclosure(rho)
        # centered residual: lambda_k x_k + N_k(V); the equilibrium part
        # cancels, so the need tracks the coupling width, not the magnitude
        resid = np.array([
            (lam_mid[k - m - 1] * Interval.point(float(center[k - 1]))
             + kf.eval_N_head(cub, k)).abs().hi
            for k in range(m + 1, Mp + 1)])
        new_rho = np.maximum(2.0 * resid / lam_lo, 1e-14)
        if np.all(new_rho <= rho * 1.001):
            break
        rho = new_rho
    cub = enclosure(rho)

    # (ii) middle faces inward
    from .cuboid import face as face_of, FaceId
    for k in range(m + 1, Mp + 1):
        up = kf.eval_F_head(face_of(cub, FaceId(k, +1)), mu, k)
        dn = kf.eval_F_head(face_of(cub, FaceId(k, -1)), mu, k)
        if not (up.hi < 0.0 and dn.lo > 0.0):
            raise FaceNotInward(f"middle face {k}: up {up}, down {dn}")
    # (iii) tail faces
    _tail_faces_ok(cub, mu)
    # (i) block contraction (subdivided: log norms are pointwise suprema)
    from .cone_lognorm import block_lognorm_upper
    splits = ((1, 12), (2, 4))
    l_blk = block_lognorm_upper(cub, mu, m, A, head_splits=splits)
    if not (l_blk < 0.0):
        raise IntervalError(f"block log norm {l_blk} not negative")
    mixed = TailedCuboid(
        tuple(Interval.point(float(center[k - 1])) if k <= m else cub.mode(k)
              for k in range(1, Mp + 1)), D, s_tail)
    fvals = [kf.eval_F_head(mixed, mu, k) for k in range(1, m + 1)]
    delta = 0.0
    for j in range(m):
        acc = Interval.point(0.0)
        for k in range(m):
            acc = acc + A[j, k] * fvals[k]
        delta = max(delta, acc.abs().hi)
    if not (delta < abs(l_blk) * r):
        raise IntervalError(f"ball defect {delta:.3e} >= |l| r = "
                            f"{abs(l_blk) * r:.3e}")
    # (iv) full log norm over the enclosure
    l_full = lognorm_upper_bound(cub, mu, m, A, jobs=jobs,
                                 head_splits=splits).hi
    if not (l_full < 0.0):
        raise IntervalError(f"full log norm bound {l_full} not negative")
    frag = {
        "pass": True,
        "lognorm_upper": l_full,
        "block_lognorm": l_blk,
        "radius": r,
        "defect": delta,
        "middle_rho": [float(x) for x in rho],
        "tail_C": D,
        "tail_s": s_tail,
        "center_head3": [float(x) for x in center[:3]],
        "enclosure": cub.to_json_dict(),
    }
    return BasinResult(cub, A, l_full, m, center, r, delta, frag, rho)


# ---------------------------------------------------------------------------
# Rigorous propagation (vectorized interval arithmetic)
# ---------------------------------------------------------------------------

_UP = np.inf
_DN = -np.inf


def _nxt(a, d):
    return np.nextafter(a, d)


class IBox:
    """Interval vector as paired float arrays with outward rounding."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)

    def copy(self):
        return IBox(self.lo.copy(), self.hi.copy())

    def add(self, o):
        return IBox(_nxt(self.lo + o.lo, _DN), _nxt(self.hi + o.hi, _UP))

    def mul(self, o):
        p1, p2 = self.lo * o.lo, self.lo * o.hi
        p3, p4 = self.hi * o.lo, self.hi * o.hi
        lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
        hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
        return IBox(_nxt(lo, _DN), _nxt(hi, _UP))

    def scale_iv(self, lo_s, hi_s):
        """Multiply by per-component interval scalars (arrays or floats)."""
        return self.mul(IBox(np.broadcast_to(np.asarray(lo_s, float), self.lo.shape).copy(),
                             np.broadcast_to(np.asarray(hi_s, float), self.hi.shape).copy()))

    def hull(self, o):
        return IBox(np.minimum(self.lo, o.lo), np.maximum(self.hi, o.hi))

    def widen(self, factor):
        mid = 0.5 * (self.lo + self.hi)
        lo = _nxt(mid + factor * _nxt(self.lo - mid, _DN), _DN)
        hi = _nxt(mid + factor * _nxt(self.hi - mid, _UP), _UP)
        return IBox(np.minimum(lo, self.lo), np.maximum(hi, self.hi))

    def mag(self):
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def subset(self, o) -> bool:
        return bool(np.all(o.lo <= self.lo) and np.all(self.hi <= o.hi))

    def mid(self):
        return 0.5 * (self.lo + self.hi)

    def rad(self):
        return _nxt(0.5 * (self.hi - self.lo), _UP)


@dataclass
class PropagationState:
    enclosure: IBox
    tail_C: float
    tail_s: float
    time: Interval
    step_count: int
    trace: list = field(default_factory=list)

    def head_cuboid(self) -> TailedCuboid:
        head = tuple(Interval(float(l), float(h))
                     for l, h in zip(self.enclosure.lo, self.enclosure.hi))
        return TailedCuboid(head, self.tail_C, self.tail_s)


class KSPropagator:
    """Exponential-Euler interval stepper for the Mp-mode head + tail."""

    def __init__(self, mu: Interval, Mp: int, h: float, region: TailedCuboid):
        self.mu = mu
        self.Mp = Mp
        self.h = h
        self.region = region
        if region.M != Mp:
            raise IntervalError("region head length must equal Mp")
        self.region_box = IBox(np.array([region.mode(k).lo for k in range(1, Mp + 1)]),
                               np.array([region.mode(k).hi for k in range(1, Mp + 1)]))
        self.D = region.tail_C
        self.s = region.tail_s
        lam = [kf.lambda_k(mu, k) for k in range(1, Mp + 1)]
        self.lam_lo = np.array([l.lo for l in lam])
        self.lam_hi = np.array([l.hi for l in lam])
        hiv = Interval.point(h)
        exps, p1, p2 = [], [], []
        for l in lam:
            z = l * hiv
            e = z.exp()
            exps.append(e)
            p1.append(phi1(z) * hiv)
            p2.append(phi2(z) * hiv * hiv)
        self.exp_lo = np.array([e.lo for e in exps])
        self.exp_hi = np.array([e.hi for e in exps])
        self.p1_lo = np.array([p.lo for p in p1])
        self.p1_hi = np.array([p.hi for p in p1])
        self.p2_lo = np.array([p.lo for p in p2])
        self.p2_hi = np.array([p.hi for p in p2])
        ks = np.arange(1, Mp + 1, dtype=float)
        self.ks = ks
        # tail magnitudes for padded indices Mp+1 .. 3*Mp and closed forms
        self.pad_tail = np.array(
            [self.D / float(i) ** self.s for i in range(Mp + 1, 3 * Mp + 2)])
        self.is_far = np.array(
            [kf.is_tail_bound(k, region).hi for k in range(1, Mp + 1)])
        # row-tail of dN beyond the pad, and the far-field velocity bound
        row_tail = []
        vfar = None
        for k in range(1, Mp + 1):
            row_tail.append(kf.deriv_row_bound(k, region).hi)
        self.row_tail = np.array(row_tail)
        kq = Mp + 1
        lamq = kf.lambda_k(mu, kq).abs().hi
        nq = (kf.tildeN_value_bound(kq, region).hi if kq > 2 * region.M
              else kf.eval_N_head(region, kq).abs().hi)
        self.v_far = lamq * self.D / kq ** self.s + nq
        self._verify_tail_faces()

    # -- region tail faces ------------------------------------------------

    def _verify_tail_faces(self):
        reg = self.region
        for k in range(self.Mp + 1, 2 * self.Mp + 1):
            lam = kf.lambda_k(self.mu, k)
            if lam.hi >= 0.0:
                raise FaceNotInward(f"tail mode {k} not dissipative")
            amp = self.D / float(k) ** self.s
            drive = kf.eval_N_head(reg, k).abs().hi
            if not (lam.abs().lo * amp > drive):
                raise FaceNotInward(
                    f"region tail face {k}: |lambda| D/k^s = "
                    f"{lam.abs().lo * amp:.3e} <= drive {drive:.3e}")
        k0 = 2 * self.Mp + 1
        lam0 = kf.lambda_k(self.mu, k0)
        amp0 = self.D / float(k0) ** self.s
        drive0 = (kf.tildeN_value_bound(k0, reg).hi
                  + kf.is_tail_bound(k0, reg).hi + kf.fs_tail_bound(k0, reg).hi)
        if not (lam0.abs().lo * amp0 > drive0):
            raise FaceNotInward(f"far tail criterion fails at k = {k0}")
        # monotone beyond k0: LHS * k^{s-2} grows like D (mu k^2 - 1), the
        # drive * k^{s-2} decreases (shown in the tail lemmas)

    # -- field evaluation --------------------------------------------------

    def _padded(self, box: IBox) -> IBox:
        """Modes 0..3Mp+1: 0, head, tail envelopes (as symmetric intervals)."""
        n = self.Mp
        lo = np.zeros(3 * n + 2)
        hi = np.zeros(3 * n + 2)
        lo[1:n + 1] = box.lo
        hi[1:n + 1] = box.hi
        lo[n + 1:] = -self.pad_tail
        hi[n + 1:] = self.pad_tail
        return IBox(lo, hi)

    def field(self, box: IBox) -> IBox:
        """Enclosure of the nonlinear part N_1..N_Mp over (box, tail)."""
        n = self.Mp
        pad = self._padded(box)
        # product table P[i, j] = a_i a_j for i, j in 1..n
        ai_lo = box.lo[:, None]
        ai_hi = box.hi[:, None]
        aj_lo = box.lo[None, :]
        aj_hi = box.hi[None, :]
        p1, p2 = ai_lo * aj_lo, ai_lo * aj_hi
        p3, p4 = ai_hi * aj_lo, ai_hi * aj_hi
        P_lo = _nxt(np.minimum(np.minimum(p1, p2), np.minimum(p3, p4)), _DN)
        P_hi = _nxt(np.maximum(np.maximum(p1, p2), np.maximum(p3, p4)), _UP)
        out_lo = np.zeros(n)
        out_hi = np.zeros(n)
        mags = box.mag()
        for k in range(1, n + 1):
            # FS: -k sum_{i<k} a_i a_{k-i}
            if k > 1:
                ii = np.arange(1, k)
                fs_lo = np.sum(P_lo[ii - 1, k - ii - 1])
                fs_hi = np.sum(P_hi[ii - 1, k - ii - 1])
            else:
                fs_lo = fs_hi = 0.0
            # IS explicit: 2k sum_{i<=n-k} a_i a_{k+i}
            if n - k >= 1:
                ii = np.arange(1, n - k + 1)
                is_lo = np.sum(P_lo[ii - 1, k + ii - 1])
                is_hi = np.sum(P_hi[ii - 1, k + ii - 1])
            else:
                is_lo = is_hi = 0.0
            # IS head-x-tail: i in (n-k, n], partner k+i > n
            lo_i = max(1, n - k + 1)
            ii = np.arange(lo_i, n + 1)
            ht = np.sum(mags[ii - 1] * self.pad_tail[k + ii - n - 1]) if len(ii) else 0.0
            lo_v = -k * fs_hi + 2 * k * is_lo - 2 * k * ht - self.is_far[k - 1]
            hi_v = -k * fs_lo + 2 * k * is_hi + 2 * k * ht + self.is_far[k - 1]
            out_lo[k - 1] = _nxt(_nxt(lo_v, _DN), _DN)
            out_hi[k - 1] = _nxt(_nxt(hi_v, _UP), _UP)
        return IBox(out_lo, out_hi)

    def full_field(self, box: IBox, nbox: IBox | None = None) -> IBox:
        if nbox is None:
            nbox = self.field(box)
        return box.scale_iv(self.lam_lo, self.lam_hi).add(nbox)

    def jacobian_N(self, box: IBox):
        """Interval matrix (lo, hi) of dN_k/da_j over (box, tail), k,j <= Mp."""
        n = self.Mp
        pad = self._padded(box)
        k_idx = np.arange(1, n + 1)[:, None]
        j_idx = np.arange(1, n + 1)[None, :]
        # dN_k/da_j = 2k ( -a_{k-j} [k>j] + a_{k+j} + a_{j-k} [j>k] )
        diff = k_idx - j_idx
        Jlo = np.zeros((n, n))
        Jhi = np.zeros((n, n))
        kj = (k_idx + j_idx).clip(max=3 * n + 1)
        Jlo += pad.lo[kj]
        Jhi += pad.hi[kj]
        pos = diff > 0
        Jlo[pos] += (-pad.hi[diff[pos]])
        Jhi[pos] += (-pad.lo[diff[pos]])
        neg = diff < 0
        Jlo[neg] += pad.lo[-diff[neg]]
        Jhi[neg] += pad.hi[-diff[neg]]
        two_k = 2.0 * k_idx.astype(float)
        return _nxt(Jlo * two_k, _DN), _nxt(Jhi * two_k, _UP)

    def jacobian_rows_times(self, box: IBox, vel: IBox,
                            jac=None) -> IBox:
        """Enclosure of W_k = d/dt N_k = sum_j dN_k/da_j * F_j over the box."""
        Jlo, Jhi = jac if jac is not None else self.jacobian_N(box)
        v_lo = vel.lo[None, :]
        v_hi = vel.hi[None, :]
        q1, q2 = Jlo * v_lo, Jlo * v_hi
        q3, q4 = Jhi * v_lo, Jhi * v_hi
        w_lo = np.sum(_nxt(np.minimum(np.minimum(q1, q2), np.minimum(q3, q4)), _DN), axis=1)
        w_hi = np.sum(_nxt(np.maximum(np.maximum(q1, q2), np.maximum(q3, q4)), _UP), axis=1)
        # tail columns: |dN_k/da_j| row tail times far-velocity bound
        slack = _nxt(self.row_tail * self.v_far, _UP)
        return IBox(_nxt(w_lo - slack, _DN), _nxt(w_hi + slack, _UP))

    # -- stepping -----------------------------------------------------------

    def _advance(self, box: IBox, nbox: IBox, wbox: IBox) -> IBox:
        out = box.scale_iv(self.exp_lo, self.exp_hi)
        out = out.add(nbox.scale_iv(self.p1_lo, self.p1_hi))
        out = out.add(wbox.scale_iv(self.p2_lo, self.p2_hi))
        return out

    def _sweep(self, box: IBox, nbox: IBox) -> IBox:
        """Hull of e^{lam s} box + phi1(s) N over s in [0, h]."""
        e_lo = np.minimum(self.exp_lo, 1.0)
        e_hi = np.maximum(self.exp_hi, 1.0)
        part1 = box.scale_iv(e_lo, e_hi)
        part2 = nbox.scale_iv(np.minimum(self.p1_lo, 0.0),
                              np.maximum(self.p1_hi, 0.0))
        return part1.add(part2)

    def _inflate(self, b: IBox, factor: float) -> IBox:
        """Multiplicative widening plus an absolute pad (thin boxes need
        room for the nonlinear sweep of the re-check)."""
        out = b.widen(factor)
        pad = 1e-12 + (factor - 1.0) * self.h * (b.mag() + 1.0)
        return IBox(_nxt(out.lo - pad, _DN), _nxt(out.hi + pad, _UP))

    def _consistent_sweep(self, box: IBox) -> tuple:
        """Verified a-priori enclosure Z for the step started in box."""
        n0 = self.field(box)
        cand = self._inflate(self._sweep(box, n0), 1.1)
        for attempt in range(2):
            ncand = self.field(cand)
            swept = self._sweep(box, ncand)
            if swept.subset(cand):
                return cand, ncand, n0
            cand = self._inflate(self._sweep(box, n0), 2.0)
        raise StepSizeTooLarge(
            "one-step box not self-consistent at h = %g" % self.h)

    def step(self, box: IBox) -> IBox:
        """Mean-value-form step: center by variation of constants, deviation
        through the interval transition matrix T = e^{Lh} + Phi1 dN(Z), whose
        signed diagonal keeps the transverse contraction visible."""
        mid = box.mid()
        cbox = IBox(mid.copy(), mid.copy())
        zc, nzc, nc = self._consistent_sweep(cbox)
        wc = self.jacobian_rows_times(zc, self.full_field(zc, nzc))
        cnew = self._advance(cbox, nc, wc)
        # deviation dynamics over the fat a-priori box
        z, nz, _ = self._consistent_sweep(box)
        Jlo, Jhi = self.jacobian_N(z)
        # T = exp(lam h) (diagonal) + phi1_k * J_kj  (row-scaled intervals)
        p1l = self.p1_lo[:, None]
        p1h = self.p1_hi[:, None]
        q1, q2 = p1l * Jlo, p1l * Jhi
        q3, q4 = p1h * Jlo, p1h * Jhi
        Tlo = _nxt(np.minimum(np.minimum(q1, q2), np.minimum(q3, q4)), _DN)
        Thi = _nxt(np.maximum(np.maximum(q1, q2), np.maximum(q3, q4)), _UP)
        dg = np.arange(self.Mp)
        Tlo[dg, dg] += self.exp_lo
        Thi[dg, dg] += self.exp_hi
        Tmag = np.maximum(np.abs(Tlo), np.abs(Thi))
        dev = np.maximum(np.abs(z.lo - mid), np.abs(z.hi - mid))
        rad = box.rad()
        Jmag = np.maximum(np.abs(Jlo), np.abs(Jhi))
        # remainder: int e^{L(h-t)} J (delta(t) - delta(0)) dt with
        # |delta(t) - delta(0)| <= t * (|lam| dev + |J| dev + row-tail slack)
        vrate = np.abs(self.lam_hi) * dev + Jmag @ dev \
            + self.row_tail * self.pad_tail[0]
        p2m = np.maximum(np.abs(self.p2_lo), np.abs(self.p2_hi))
        rem = _nxt(p2m * (Jmag @ vrate) + self.p1_hi * self.row_tail
                   * self.pad_tail[0], _UP)
        rad_new = _nxt(Tmag @ rad + rem, _UP)
        out = IBox(_nxt(cnew.lo - rad_new, _DN), _nxt(cnew.hi + rad_new, _UP))
        if not out.subset(self.region_box):
            raise EnclosureEscapedRegion("head enclosure left the region")
        return out


def propagate(start: TailedCuboid, mu: Interval, h: float, steps: int,
              region: TailedCuboid, trace_every: int = 1000) -> PropagationState:
    """Propagate a tailed cuboid for steps * h time units."""
    Mp = region.M
    if start.M > Mp:
        raise IntervalError("start head longer than the region head")
    lo = np.array([start.mode(k).lo for k in range(1, Mp + 1)])
    hi = np.array([start.mode(k).hi for k in range(1, Mp + 1)])
    box = IBox(lo, hi)
    prop = KSPropagator(mu, Mp, h, region)
    if not box.subset(prop.region_box):
        raise EnclosureEscapedRegion("start box not inside the region")
    if start.tail_C > region.tail_C * (1 + 1e-12):
        k0 = Mp + 1
        if (start.tail_C / k0 ** start.tail_s
                > region.tail_C / k0 ** region.tail_s):
            raise EnclosureEscapedRegion("start tail outside the region tail")
    trace = []
    for n in range(steps):
        if n % trace_every == 0:
            trace.append((n, n * h, box.mid().copy(), box.rad().copy()))
        try:
            box = prop.step(box)
        except (EnclosureEscapedRegion, StepSizeTooLarge) as exc:
            raise type(exc)(f"step {n}: {exc}") from exc
    trace.append((steps, steps * h, box.mid().copy(), box.rad().copy()))
    total = Interval.point(float(steps)) * Interval.point(h)
    return PropagationState(box, region.tail_C, region.tail_s, total, steps,
                            trace)


# ---------------------------------------------------------------------------
# End-to-end connection
# ---------------------------------------------------------------------------

@dataclass
class ConnectionConfig:
    mu: float
    M_pipeline: int = 4
    seed_radius: float = 0.26
    Mp: int = 26
    h: float = 5e-4
    steps: int = 20000
    m_basin: int = 8
    s_tail: float = 12.0
    approx_target: tuple = ()
    subdivisions: tuple = ((2, 8),)   # per-mode split counts of the exit face
    region_pad: float = 1.6
    trace_every: int = 1000
    basin_rho_grid: tuple = (0.02, 0.025, 0.03)
    basin_tail_grid: tuple = (1e11, 1e12)


def _region_from_simulation(cfg: ConnectionConfig, face_mid: np.ndarray,
                            basin: BasinResult, start_box: IBox) -> TailedCuboid:
    """Non-rigorous center simulation spans the region; padded afterwards.

    The region is only a candidate: its tail faces are verified rigorously
    by the propagator, and every rigorous step checks containment.
    """
    a = face_mid.copy()
    Mp = cfg.Mp
    lo = np.minimum(a.copy(), basin.center - 1e-3)
    hi = np.maximum(a.copy(), basin.center + 1e-3)
    # semi-implicit Euler handles the stiff linear part
    nsub = 4
    hh = cfg.h * nsub
    Mp_arr = np.arange(1, Mp + 1, dtype=float)
    lam = Mp_arr ** 2 * (1.0 - cfg.mu * Mp_arr ** 2)
    for n in range(max(1, cfg.steps // nsub)):
        nl = galerkin_nonlinear_np(cfg.mu, a)
        a = (a + hh * nl) / (1.0 - hh * lam)
        lo = np.minimum(lo, a)
        hi = np.maximum(hi, a)
    lo = np.minimum(lo, start_box.lo)
    hi = np.maximum(hi, start_box.hi)
    lo = np.minimum(lo, basin.cuboid and np.array(
        [basin.cuboid.mode(k).lo for k in range(1, Mp + 1)]))
    hi = np.maximum(hi, np.array(
        [basin.cuboid.mode(k).hi for k in range(1, Mp + 1)]))
    mid = 0.5 * (lo + hi)
    ks = np.arange(1, Mp + 1, dtype=float)
    rad = 0.5 * (hi - lo) * cfg.region_pad + 2e-3 / ks ** 2
    head = tuple(Interval(float(m - r), float(m + r))
                 for m, r in zip(mid, rad))
    # region tail: large enough for the re-expressed source tail and for the
    # far-face inequality |lambda_k| D / k^s > drive at k0 = Mp + 1
    k0 = Mp + 1
    D = max(basin.cuboid.tail_C, start_tail_in_family(cfg, k0))
    for _ in range(4):
        cand = TailedCuboid(head, D, cfg.s_tail)
        lam = kf.lambda_k(Interval.point(cfg.mu), k0)
        drive = kf.eval_N_head(cand, k0).abs().hi
        need = 4.0 * drive * float(k0) ** cfg.s_tail / lam.abs().lo
        if D >= need:
            break
        D = need
    return TailedCuboid(head, D, cfg.s_tail)


def start_tail_in_family(cfg: ConnectionConfig, k0: int) -> float:
    """Source-tail constant re-expressed at exponent s_tail (match at k0)."""
    # source tail is C^3/k^6-shaped; C <= 1 for both connection mus
    c3 = 0.36
    return c3 / k0 ** 6.0 * k0 ** cfg.s_tail * 1.05


def _split_box(box: IBox, subdivisions) -> list:
    boxes = [box]
    for mode, parts in subdivisions:
        new = []
        for b in boxes:
            lo, hi = b.lo[mode - 1], b.hi[mode - 1]
            edges = np.linspace(lo, hi, parts + 1)
            for i in range(parts):
                nb = b.copy()
                nb.lo[mode - 1] = edges[i]
                nb.hi[mode - 1] = edges[i + 1]
                new.append(nb)
        boxes = new
    return boxes


def verify_connection(cfg: ConnectionConfig, jobs: int = 1) -> dict:
    """Source cone cuboid -> exit face -> propagation -> basin containment."""
    mu = Interval.point(cfg.mu)
    src = build_source_cuboid(mu, cfg.M_pipeline, cfg.seed_radius)
    face, tail_C, tail_s = source_exit_face_box(src, cfg.Mp)
    basin = build_target_basin(mu, cfg.approx_target, cfg.Mp,
                               m=cfg.m_basin, s_tail=cfg.s_tail,
                               rho_grid=cfg.basin_rho_grid,
                               tail_grid=cfg.basin_tail_grid, jobs=jobs)
    face_box = IBox(np.array([iv.lo for iv in face]),
                    np.array([iv.hi for iv in face]))
    region = _region_from_simulation(cfg, face_box.mid(), basin, face_box)
    start_D = start_tail_in_family(cfg, cfg.Mp + 1)
    if start_D > region.tail_C:
        region = TailedCuboid(region.head, start_D, cfg.s_tail)

    strips = _split_box(face_box, cfg.subdivisions)
    final_hull = None
    trace = None
    for idx, strip in enumerate(strips):
        cub = TailedCuboid(tuple(Interval(float(l), float(h))
                                 for l, h in zip(strip.lo, strip.hi)),
                           region.tail_C, cfg.s_tail)
        state = propagate(cub, mu, cfg.h, cfg.steps, region,
                          trace_every=cfg.trace_every)
        final_hull = (state.enclosure if final_hull is None
                      else final_hull.hull(state.enclosure))
        if idx == 0:
            trace = state.trace
    # containment in the basin
    bas = basin.cuboid
    contained = all(
        bas.mode(k).contains_interval(
            Interval(float(final_hull.lo[k - 1]), float(final_hull.hi[k - 1])))
        for k in range(1, cfg.Mp + 1))
    tail_ok = region.tail_C <= bas.tail_C * (1 + 1e-12) and cfg.s_tail == bas.tail_s
    passed = contained and tail_ok
    return {
        "pass": bool(passed),
        "mu": cfg.mu,
        "source": {
            "lambda_margin": src.lambda_margin,
            "far_margin": src.far_margin,
            "bif_scale": src.bif_scale,
            "cuboid": src.cuboid.to_json_dict(),
            "changes": [c.to_json_dict() for c in src.nf.changes],
        },
        "target": basin.fragment,
        "propagation": {
            "steps": cfg.steps,
            "h": cfg.h,
            "strips": len(strips),
            "final_lo": [float(x) for x in final_hull.lo],
            "final_hi": [float(x) for x in final_hull.hi],
            "final_mid_mode1": float(0.5 * (final_hull.lo[0] + final_hull.hi[0])),
            "tail_C": region.tail_C,
            "tail_s": cfg.s_tail,
        },
        "containment": {"head": bool(contained), "tail": bool(tail_ok)},
        "_trace": trace,
    }


def write_trace_csv(path, trace, Mp):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["step", "t"]
        for k in range(1, Mp + 1):
            header += [f"mid_{k}", f"rad_{k}"]
        w.writerow(header)
        for step, t, mid, rad in trace:
            row = [step, f"{t:.10g}"]
            for k in range(Mp):
                row += [f"{mid[k]:.17g}", f"{rad[k]:.17g}"]
            w.writerow(row)
