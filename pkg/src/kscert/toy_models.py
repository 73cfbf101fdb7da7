"""Two finite-dimensional pitchfork fixtures exercising the cone machinery.

Planar model:
    x' = x (nu - x^2) + x^3 y + x y^2
    y' = -y + x^2 y + x^4

Model with one extra unstable direction:
    x' = x (nu - x^2) + x^3 (y + z) + x (y^2 + z^2) + y z
    y' =  y + x^2 (y + z) + x^4 + y z
    z' = -z + x^2 (y + z) + x^4 + y z

The lemma suite runs the same verifiers used for the PDE on the explicit box
families (B0, Bc+/-, B+/-, and the 3D Bct+), reporting per-stage margins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .cone_lognorm import mineig_lower_sym, sym2x2_eig_bounds
from .interval import Interval, IntervalError, IntervalMatrix


class DimensionMismatch(IntervalError):
    pass


@dataclass(frozen=True)
class ToyModel:
    dimension: int
    nu: Interval

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise DimensionMismatch("dimension must be 2 or 3")


def toy_field(model: ToyModel, box):
    """Interval enclosure of the right-hand side over a box."""
    if len(box) != model.dimension:
        raise DimensionMismatch(f"expected {model.dimension} coordinates")
    nu = model.nu
    if model.dimension == 2:
        x, y = box
        fx = x * (nu - x * x) + x.pow_int(3) * y + x * y.pow_int(2)
        fy = -y + x * x * y + x.pow_int(4)
        return [fx, fy]
    x, y, z = box
    fx = (x * (nu - x * x) + x.pow_int(3) * (y + z)
          + x * (y.pow_int(2) + z.pow_int(2)) + y * z)
    fy = y + x * x * (y + z) + x.pow_int(4) + y * z
    fz = -z + x * x * (y + z) + x.pow_int(4) + y * z
    return [fx, fy, fz]


def toy_jacobian(model: ToyModel, box) -> IntervalMatrix:
    if len(box) != model.dimension:
        raise DimensionMismatch(f"expected {model.dimension} coordinates")
    nu = model.nu
    one = Interval.point(1.0)
    if model.dimension == 2:
        x, y = box
        j = IntervalMatrix(2, 2)
        j[0, 0] = nu - 3 * x * x + 3 * x * x * y + y * y
        j[0, 1] = x.pow_int(3) + 2 * x * y
        j[1, 0] = 2 * x * y + 4 * x.pow_int(3)
        j[1, 1] = -one + x * x
        return j
    x, y, z = box
    j = IntervalMatrix(3, 3)
    j[0, 0] = nu - 3 * x * x + 3 * x * x * (y + z) + y * y + z * z
    j[0, 1] = x.pow_int(3) + 2 * x * y + z
    j[0, 2] = x.pow_int(3) + 2 * x * z + y
    j[1, 0] = 2 * x * (y + z) + 4 * x.pow_int(3)
    j[1, 1] = one + x * x + z
    j[1, 2] = x * x + y
    j[2, 0] = 2 * x * (y + z) + 4 * x.pow_int(3)
    j[2, 1] = x * x + z
    j[2, 2] = -one + x * x + y
    return j


# ---------------------------------------------------------------------------
# Polynomial form of the Jacobian entries: exact cancellations in the
# symmetrized combinations q_j J_ji + q_i J_ij happen at coefficient level,
# where interval evaluation of separately-enclosed entries would lose them.
# Monomials are exponent tuples over (x, y[, z], nu).
# ---------------------------------------------------------------------------

def _jac_polys(dim: int):
    if dim == 2:
        # variables (x, y, nu)
        return {
            (0, 0): {(0, 0, 1): 1.0, (2, 0, 0): -3.0, (2, 1, 0): 3.0, (0, 2, 0): 1.0},
            (0, 1): {(3, 0, 0): 1.0, (1, 1, 0): 2.0},
            (1, 0): {(1, 1, 0): 2.0, (3, 0, 0): 4.0},
            (1, 1): {(0, 0, 0): -1.0, (2, 0, 0): 1.0},
        }
    # variables (x, y, z, nu)
    return {
        (0, 0): {(0, 0, 0, 1): 1.0, (2, 0, 0, 0): -3.0, (2, 1, 0, 0): 3.0,
                 (2, 0, 1, 0): 3.0, (0, 2, 0, 0): 1.0, (0, 0, 2, 0): 1.0},
        (0, 1): {(3, 0, 0, 0): 1.0, (1, 1, 0, 0): 2.0, (0, 0, 1, 0): 1.0},
        (0, 2): {(3, 0, 0, 0): 1.0, (1, 0, 1, 0): 2.0, (0, 1, 0, 0): 1.0},
        (1, 0): {(1, 1, 0, 0): 2.0, (1, 0, 1, 0): 2.0, (3, 0, 0, 0): 4.0},
        (1, 1): {(0, 0, 0, 0): 1.0, (2, 0, 0, 0): 1.0, (0, 0, 1, 0): 1.0},
        (1, 2): {(2, 0, 0, 0): 1.0, (0, 1, 0, 0): 1.0},
        (2, 0): {(1, 1, 0, 0): 2.0, (1, 0, 1, 0): 2.0, (3, 0, 0, 0): 4.0},
        (2, 1): {(2, 0, 0, 0): 1.0, (0, 0, 1, 0): 1.0},
        (2, 2): {(0, 0, 0, 0): -1.0, (2, 0, 0, 0): 1.0, (0, 1, 0, 0): 1.0},
    }


def _poly_eval(poly, vals):
    acc = Interval.point(0.0)
    for expo, coeff in poly.items():
        term = Interval.point(coeff)
        for v, e in zip(vals, expo):
            if e:
                term = term * v.pow_int(e)
        acc = acc + term
    return acc


def _poly_combine(pa, qa, pb, qb):
    out = dict((k, qa * c) for k, c in pa.items())
    for k, c in pb.items():
        out[k] = out.get(k, 0.0) + qb * c
    return {k: c for k, c in out.items() if c != 0.0}


def pair_matrix(model: ToyModel, box, signs) -> IntervalMatrix:
    """A = (DF)^T Q + Q DF with coefficient-level cancellation."""
    dim = model.dimension
    polys = _jac_polys(dim)
    vals = list(box) + [model.nu]
    a = IntervalMatrix(dim, dim)
    for i in range(dim):
        for j in range(dim):
            comb = _poly_combine(polys[(j, i)], float(signs[j]),
                                 polys[(i, j)], float(signs[i]))
            a[i, j] = _poly_eval(comb, vals)
    return a


def sym_half_matrix(model: ToyModel, box) -> IntervalMatrix:
    """(DF + DF^T)/2 with coefficient-level cancellation."""
    dim = model.dimension
    polys = _jac_polys(dim)
    vals = list(box) + [model.nu]
    a = IntervalMatrix(dim, dim)
    for i in range(dim):
        for j in range(dim):
            comb = _poly_combine(polys[(j, i)], 0.5, polys[(i, j)], 0.5)
            a[i, j] = _poly_eval(comb, vals)
    return a


# ---------------------------------------------------------------------------
# Box families from the proofs
# ---------------------------------------------------------------------------

def _transverse(model: ToyModel, nu: float):
    if model.dimension == 2:
        return [Interval.symmetric(nu)]
    r = nu ** 1.5
    return [Interval.symmetric(r), Interval.symmetric(r)]


def boxes(model: ToyModel):
    nu = model.nu.hi
    sq = math.sqrt(nu)
    tv = _transverse(model, nu)
    return {
        "B": [Interval.symmetric(math.sqrt(2 * nu))] + tv,
        "B0": [Interval.symmetric(sq / 2)] + tv,
        "Bc+": [Interval.exact(sq / 2, math.sqrt(nu / 2))] + tv,
        "B+": [Interval.exact(math.sqrt(nu / 2), math.sqrt(2 * nu))] + tv,
        "Bct+": [Interval.exact(sq / 2, math.sqrt(2 * nu))] + tv,
    }


def _face_signs_ok(model: ToyModel, box, exit_dims):
    """Every face strictly inward except the listed exit dimensions (outward)."""
    for d in range(model.dimension):
        for sgn, end in ((+1, box[d].hi), (-1, box[d].lo)):
            pinned = list(box)
            pinned[d] = Interval.point(end)
            f = toy_field(model, pinned)[d]
            if d in exit_dims:
                ok = f.lo > 0.0 if sgn > 0 else f.hi < 0.0
            else:
                ok = f.hi < 0.0 if sgn > 0 else f.lo > 0.0
            if not ok:
                return False, f"dim {d} face {sgn:+d}: field {f}"
    return True, ""


def toy_lemma_suite(model: ToyModel, nu: float, jobs: int = 1) -> dict:
    """Run the four proof stages on the explicit boxes; report margins."""
    model = ToyModel(model.dimension, Interval.point(nu))
    bx = boxes(model)
    stages = {}

    # Stage 1: hyperbolicity of the origin after the bifurcation (cones on B0)
    signs = (1, -1) if model.dimension == 2 else (1, 1, -1)
    a0 = pair_matrix(model, bx["B0"], signs)
    margin1 = mineig_lower_sym(a0)
    iso_ok, iso_why = _face_signs_ok(
        model, bx["B0"],
        exit_dims=(0,) if model.dimension == 2 else (0, 1))
    stages["zero_hyperbolic"] = {
        "pass": bool(margin1 > 0.0 and iso_ok),
        "margin": margin1,
        "isolating": iso_ok,
        "note": iso_why,
    }

    # Stage 2: growth in the bifurcation direction on Bc+
    fx = toy_field(model, bx["Bc+"])[0]
    stages["connection_sets"] = {"pass": bool(fx.lo > 0.0), "margin": fx.lo}

    # Stage 3: basin / hyperbolicity of the born fixed point on B+
    if model.dimension == 2:
        inv_ok, inv_why = _face_signs_ok(model, bx["B+"], exit_dims=())
        sm = sym_half_matrix(model, bx["B+"])
        l2 = sym2x2_eig_bounds(sm[0, 0], sm[1, 1], sm[0, 1])[1].hi
        stages["born_fixed_points"] = {
            "pass": bool(inv_ok and l2 < 0.0),
            "lognorm": l2,
            "forward_invariant": inv_ok,
            "note": inv_why,
        }
    else:
        signs2 = (-1, 1, -1)
        ap = pair_matrix(model, bx["B+"], signs2)
        margin2 = mineig_lower_sym(ap)
        iso2, why2 = _face_signs_ok(model, bx["B+"], exit_dims=(1,))
        stages["born_fixed_points"] = {
            "pass": bool(margin2 > 0.0 and iso2),
            "margin": margin2,
            "isolating": iso2,
            "note": why2,
        }

    # Stage 4 (3D only): central-direction cone invariance on Bct+
    # Unstable block {y} needs (w, A_yy w) >= lam; the central+stable block
    # {x, z} needs >= -lam/4; twice the cross norm must stay below lam/4.
    if model.dimension == 3:
        act = pair_matrix(model, bx["Bct+"], (-1, 1, -1))
        lam = act[1, 1].lo
        blk = sym2x2_eig_bounds(act[0, 0], act[2, 2], act[0, 2])[0].lo
        gam = (act[0, 1].pow_int(2) + act[2, 1].pow_int(2)).sqrt().hi
        ok = lam > 0.0 and blk >= -lam / 4.0 and 2.0 * gam < lam / 4.0
        iso3, why3 = _face_signs_ok(model, bx["Bct+"], exit_dims=(1,))
        stages["central_cones"] = {
            "pass": bool(ok and iso3),
            "lambda": lam,
            "central_margin": blk,
            "cross_norm": gam,
            "isolating": iso3,
            "note": why3,
        }

    overall = all(s["pass"] for s in stages.values())
    return {"pass": overall, "nu": nu, "dimension": model.dimension,
            "stages": stages}
