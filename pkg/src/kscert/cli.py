"""Command-line front end: TOML experiment configs in, certificates out.

Commands (config key ``kind``): bifurcation, connection, fixed_point, toy.
Exit codes: 0 verified, 1 verified-false (certificate still written),
2 config/usage errors.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:          # Python 3.10
    import tomli as tomllib

from .bif_checker import BifParams, C_of_mu, make_range, verify_pitchfork
from .certificates import write_certificate
from .heteroclinic import (
    BasinNotFound,
    ConeVerificationFailed,
    ConnectionConfig,
    build_source_cuboid,
    build_target_basin,
    verify_connection,
    write_trace_csv,
)
from .interval import Interval, IntervalError
from .normal_form import (
    DEFAULT_REMOVALS_MU1,
    DEFAULT_REMOVALS_MU025,
    ks_pipeline,
)
from .toy_models import ToyModel, toy_lemma_suite


class ConfigError(Exception):
    pass


def _load_config(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _removals(cfg, default):
    if "removals" not in cfg:
        return default
    out = []
    for item in cfg["removals"]:
        out.append((int(item["eq"]),
                    {int(k): int(v) for k, v in item["monomial"].items()}))
    return tuple(out)


def cmd_prove_bif(cfg: dict, out_dir: str, jobs: int) -> int:
    try:
        p = cfg["params"]
        mu_lo, mu_hi = float(p["mu_min"]), float(p["mu_max"])
        bif_mode = int(p.get("bif_mode", 1))
        M = int(p["M"])
        s, pe = float(p.get("s", 6.0)), float(p.get("p", 4.0))
        omega, zeta = int(p.get("omega", 3)), float(p.get("zeta", 1.2))
        b = cfg["bif"]
        params = BifParams(
            zeta=zeta, omega=omega, s=s, p=pe,
            K=float(b["K"]) if "K" in b else None,
            l=float(b["l"]), gamma_minus=float(b["gamma_minus"]),
            gamma_plus=float(b["gamma_plus"]), M=M, bif_mode=bif_mode,
            allow_gamma_above_one=bool(b.get("allow_gamma_above_one", False)))
        removals = _removals(cfg, DEFAULT_REMOVALS_MU1 if bif_mode == 1
                             else DEFAULT_REMOVALS_MU025)
        rng = make_range(mu_lo, mu_hi, bif_mode)
    except (KeyError, ValueError, IntervalError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    mu = Interval(mu_lo, mu_hi)
    guess = Interval(0.0, 0.25)
    nf0 = ks_pipeline(mu, M, s, pe, omega, zeta, bif_mode, guess, removals)
    Cbar = C_of_mu(nf0, Interval.point(rng.mu_minus))
    C = Interval(0.0, Cbar.hi)
    nf = ks_pipeline(mu, M, s, pe, omega, zeta, bif_mode, C, removals)
    nfr = ks_pipeline(mu, M, s, pe, omega, zeta, bif_mode, C, removals,
                      bif_scale=params.gamma_minus / params.zeta)
    result = verify_pitchfork(nf, nfr, rng, params)
    # tight C at the post-bifurcation end, from a point-mu pipeline
    nfp = ks_pipeline(Interval.point(rng.mu_minus), M, s, pe, omega, zeta,
                      bif_mode, C, removals)
    Ct = C_of_mu(nfp, Interval.point(rng.mu_minus))
    result["C_post_end"] = [Ct.lo, Ct.hi]
    ok = write_certificate(os.path.join(out_dir, "certificate.json"),
                           "bifurcation", cfg, result, result["pass"])
    return 0 if ok else 1


def cmd_prove_connection(cfg: dict, out_dir: str, jobs: int) -> int:
    try:
        p = cfg["connection"]
        ccfg = ConnectionConfig(
            mu=float(p["mu"]),
            M_pipeline=int(p.get("M_pipeline", 4)),
            seed_radius=float(p["seed_radius"]),
            Mp=int(p.get("Mp", 26)),
            h=float(p["h"]),
            steps=int(p["steps"]),
            m_basin=int(p.get("m_basin", 8)),
            s_tail=float(p.get("s_tail", 12.0)),
            approx_target=tuple(float(x) for x in p["approx_target"]),
            subdivisions=tuple((int(a), int(b))
                               for a, b in p.get("subdivisions", [[2, 8]])),
            region_pad=float(p.get("region_pad", 1.6)),
            trace_every=int(p.get("trace_every", 1000)),
            basin_rho_grid=tuple(float(x) for x in
                                 p.get("basin_rho_grid", [0.02, 0.025, 0.03])),
            basin_tail_grid=tuple(float(x) for x in
                                  p.get("basin_tail_grid", [1e11, 1e12])),
        )
    except (KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        result = verify_connection(ccfg, jobs=jobs)
    except (ConeVerificationFailed, BasinNotFound, IntervalError) as exc:
        result = {"pass": False, "error": f"{type(exc).__name__}: {exc}"}
    trace = result.pop("_trace", None)
    if trace is not None:
        write_trace_csv(os.path.join(out_dir, "trace.csv"), trace, ccfg.Mp)
    ok = write_certificate(os.path.join(out_dir, "certificate.json"),
                           "connection", cfg, result, result["pass"])
    return 0 if ok else 1


def cmd_check_fixed_point(cfg: dict, out_dir: str, jobs: int) -> int:
    try:
        p = cfg["fixed_point"]
        role = p["role"]
        mu = Interval.point(float(p["mu"]))
        if role not in ("source", "target"):
            raise KeyError(f"role must be source or target, got {role!r}")
    except (KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if role == "source":
        try:
            src = build_source_cuboid(mu, int(p.get("M_pipeline", 4)),
                                      float(p["seed_radius"]))
            stages = {
                "role": "source",
                "lambda_margin": src.lambda_margin,
                "far_margin": src.far_margin,
                "cuboid": src.cuboid.to_json_dict(),
                "pass": src.lambda_margin > 0.0,
            }
        except (ConeVerificationFailed, IntervalError) as exc:
            stages = {"role": "source", "pass": False,
                      "error": f"{type(exc).__name__}: {exc}"}
    else:
        try:
            basin = build_target_basin(
                mu, tuple(float(x) for x in p["approx_target"]),
                int(p.get("Mp", 26)), m=int(p.get("m_basin", 8)),
                rho_grid=tuple(float(x) for x in
                               p.get("basin_rho_grid", [0.02, 0.025, 0.03])),
                tail_grid=tuple(float(x) for x in
                                p.get("basin_tail_grid", [1e11, 1e12])),
                jobs=jobs)
            stages = {"role": "target", "pass": True, **basin.fragment}
        except (BasinNotFound, IntervalError) as exc:
            stages = {"role": "target", "pass": False,
                      "error": f"{type(exc).__name__}: {exc}"}
    ok = write_certificate(os.path.join(out_dir, "certificate.json"),
                           "fixed_point", cfg, stages, stages["pass"])
    return 0 if ok else 1


def cmd_toy(cfg: dict, out_dir: str, jobs: int) -> int:
    try:
        p = cfg["toy"]
        model = p["model"]
        nu = float(p["nu"])
        dim = {"planar": 2, "unstable": 3}[model]
    except (KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    result = toy_lemma_suite(ToyModel(dim, Interval.point(nu)), nu, jobs=jobs)
    ok = write_certificate(os.path.join(out_dir, "certificate.json"),
                           "toy", cfg, result, result["pass"])
    return 0 if ok else 1


COMMANDS = {
    "bifurcation": cmd_prove_bif,
    "connection": cmd_prove_connection,
    "fixed_point": cmd_check_fixed_point,
    "toy": cmd_toy,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kscert",
        description="interval-arithmetic certificates for the "
                    "Kuramoto-Sivashinsky pitchfork bifurcation and its "
                    "heteroclinic connections")
    parser.add_argument("--config", required=True, help="TOML experiment file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker threads for independent checks")
    parser.add_argument("--allow-gamma-above-one", action="store_true",
                        help="accept gamma_plus slightly above 1 "
                             "(recorded in the certificate)")
    args = parser.parse_args(argv)
    # rigor paths use no randomness; the env var is accepted and ignored
    os.environ.pop("RIGOR_SEED", None)
    try:
        cfg = _load_config(args.config)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    kind = cfg.get("kind")
    if kind not in COMMANDS:
        print(f"config error: unknown kind {kind!r}", file=sys.stderr)
        return 2
    if args.allow_gamma_above_one and kind == "bifurcation":
        cfg.setdefault("bif", {})["allow_gamma_above_one"] = True
    os.makedirs(args.out, exist_ok=True)
    t0 = time.time()
    rc = COMMANDS[kind](cfg, args.out, max(1, args.jobs))
    with open(os.path.join(args.out, "run.log"), "a") as fh:
        fh.write(f"kind={kind} rc={rc} wall_clock_s={time.time() - t0:.3f}\n")
    return rc


if __name__ == "__main__":
    sys.exit(main())
