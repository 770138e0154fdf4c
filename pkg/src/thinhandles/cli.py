"""Command-line front end.

Every command prints one JSON record with ``schema`` set to ``"1"`` and a
``config`` echo (including defaults such as the dimension-4 threshold
choice and the asymptotic cut-off). Exit codes: 0 success, 1 failed
verification, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bessel, constants, handles, regimes, spectra
from ._errors import DomainError, HandleError, NumericalError, RangeError, ValidationError

SCHEMA = "1"
OUTPUT_ENV = "THINHANDLES_OUTPUT_DIR"

EXIT_OK, EXIT_VERIFY, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


def _to_json(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, enum_types()):
        return x.value
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (set, frozenset)):
        return sorted(_to_json(v) for v in x)
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    raise TypeError(f"cannot serialise {type(x).__name__}")


def enum_types():
    return (regimes.Theorem, regimes.Scale)


def _clean(x):
    """Recursively convert to JSON-ready values (non-finite floats become strings)."""
    if isinstance(x, dict):
        return {str(_to_json(k) if not isinstance(k, str) else k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, float):
        return x if math.isfinite(x) else _to_json(x)
    return _clean(_to_json(x))


def _emit(record: dict, out: str | None):
    text = json.dumps(_clean(record), indent=2, sort_keys=True)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    print(text)


def fmt(x) -> str:
    """Round-trip float formatting used in every CSV file."""
    return f"{float(x):.17g}"


def _rational(name):
    def parse(text):
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError):
            raise argparse.ArgumentTypeError(f"{name}: expected a number or p/q, got {text!r}")
    return parse


def _positive_float(name):
    def parse(text):
        try:
            v = float(Fraction(text))
        except (ValueError, ZeroDivisionError):
            raise argparse.ArgumentTypeError(f"{name}: expected a number, got {text!r}")
        return v
    return parse


def _output_dir(arg):
    d = Path(arg or os.environ.get(OUTPUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _manifold(args):
    try:
        return constants.ManifoldConstants(
            N=args.N, K=args.K, r0=args.r0, r1=args.r1, kappa0=args.kappa0, C_ext=args.C_ext, C_nbhd=args.C_nbhd
        )
    except DomainError as exc:
        raise ValidationError("manifold", str(exc)) from exc


# ---------------------------------------------------------------- commands


def cmd_constants(args) -> dict:
    m, r, eta = args.m, args.r, args.eta
    if not 0 < r < eta:
        raise ValidationError("r", f"need 0 < r < eta, got r={r}, eta={eta}")
    config = {"m": m, "r": r, "eta": eta, "oracle": args.oracle, "eta_m": constants.ETA_M}
    result = {
        "trace_annulus": constants.trace_const_annulus(m, r, eta),
        "trace_ball": constants.trace_const_ball(m, r),
        "trace_full": constants.trace_const_full(m, r, eta),
        "nonconc": constants.nonconc_const(m, r, eta),
        "log_bracket": constants.log2_bracket(1.0 / eta, m),
    }
    if eta < constants.ETA_M:
        ta = constants.trace_const_asymptotic(m, r, eta)
        na = constants.nonconc_asymptotic(m, r, eta)
        result["asymptotic"] = {
            "trace": {"leading": ta.leading_term, "remainder": ta.remainder, "remainder_scale": ta.remainder_scale,
                      "correction": constants.trace_leading_correction(m, r)},
            "nonconc": {"leading": na.leading_term, "remainder": na.remainder, "remainder_scale": na.remainder_scale,
                        "correction": constants.nonconc_leading_correction(m, r)},
        }
    else:
        result["asymptotic"] = None
        result["asymptotic_skipped"] = f"eta >= eta_m = {constants.ETA_M}"
    if args.oracle:
        ann, ball, full = constants.oracle_trace_constants(m, r, eta)
        exact = (result["trace_annulus"], result["trace_ball"], result["trace_full"])
        result["oracle"] = {
            "annulus": ann,
            "ball": ball,
            "full": full,
            "deviation": max(abs(o / e - 1.0) for o, e in zip((ann, ball, full), exact)),
        }
    return {"command": "constants", "config": config, "result": result}


def _point(args):
    return regimes.ParamPoint(args.m, args.alpha, args.lam, args.scale, args.alpha4)


def cmd_regime(args) -> dict:
    p = _point(args)
    rep = regimes.classify(p, convention=args.convention)
    config = {"m": p.m, "alpha": p.alpha, "lambda": p.lam, "scale": p.scale, "alpha4": p.alpha4,
              "convention": args.convention, "eps": args.eps}
    verdicts = {
        t.value: {"applicable": v.applicable, "exponent": v.exponent, "conditions": v.conditions, "notes": v.notes}
        for t, v in rep.verdicts.items()
    }
    result = {
        "applicable": sorted(t.value for t in rep.applicable),
        "exponent_per_theorem": {t.value: e for t, e in rep.exponent_per_theorem.items()},
        "best": None if rep.best is None else {"theorem": rep.best[0].value, "exponent": rep.best[1]},
        "uncovered": rep.uncovered,
        "verdicts": verdicts,
        "notes": rep.notes,
    }
    if args.eps is not None and rep.applicable:
        mc = _manifold(args)
        eps = args.eps
        if p.scale is regimes.Scale.LOG:
            eta = abs(math.log(eps)) ** (-float(p.alpha)) * mc.r0
        else:
            eta = eps ** float(p.alpha) * mc.r0
        geom = handles.HandleGeometry(p.m, eps, eps ** float(p.lam), eta, mc)
        errors = {}
        for t in sorted(rep.applicable, key=lambda t: t.value):
            est = regimes.error_estimate(t, geom, alpha4_choice=p.alpha4, convention=args.convention, check=False)
            errors[t.value] = {"total": est.total, "dominant": est.dominant, "terms": est.terms}
        result["error_estimates"] = errors
    return {"command": "regime", "config": config, "result": result}


def cmd_region(args) -> dict:
    m = args.m
    verts = regimes.region_vertices(m, args.figure, args.alpha4)
    config = {"m": m, "figure": args.figure, "resolution": args.resolution, "alpha4": regimes.alpha_m(4, args.alpha4)}
    result = {"vertices": {k: [a, lam] for k, (a, lam) in verts.items()}}
    if args.figure == "adhering":
        polys = {}
        for name in ("adhering", "two_copies", "fading2"):
            poly = regimes.region_polygon(m, name)
            polys[name] = {"labels": list(poly.labels), "vertices": [list(v) for v in poly.vertices],
                           "closed_edges": list(poly.closed_edges)}
        result["polygons"] = polys
    if args.resolution:
        out = _output_dir(args.output_dir)
        path = out / f"region_m{m}_{args.figure}.csv"
        res = args.resolution
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "lambda", "FadingI", "FadingII", "AdheringGeneral", "AdheringTwoCopies"])
            for i in range(res):
                a = Fraction(i, res)
                for j in range(1, 4 * res + 1):
                    lam = Fraction(j, res)
                    rep = regimes.classify(regimes.ParamPoint(m, a, lam, alpha4=args.alpha4))
                    w.writerow([fmt(a), fmt(lam)] + [int(t in rep.applicable) for t in regimes.Theorem])
        result["raster_csv"] = str(path)
    return {"command": "region", "config": config, "result": result}


def cmd_delta(args) -> dict:
    mc = _manifold(args)
    geom = handles.HandleGeometry(args.m, args.eps, args.ell, args.eta, mc)
    b = handles.delta_bundle(geom, asymptotic=args.asymptotic)
    config = {"m": args.m, "eps": args.eps, "ell": args.ell, "eta": args.eta, "asymptotic": args.asymptotic,
              "manifold": {"N": mc.N, "K": mc.K, "r0": mc.r0, "r1": mc.r1, "kappa0": mc.kappa0,
                           "C_ext": mc.C_ext, "C_nbhd": mc.C_nbhd, "C_ellreg": mc.C_ellreg}}
    result = {"bundle": b.as_dict()}
    if args.alpha is not None and args.lam is not None:
        result["orders"] = handles.delta_orders(args.m, args.alpha, args.lam).as_dict()
        config |= {"alpha": args.alpha, "lambda": args.lam}
    return {"command": "delta", "config": config, "result": result}


SWEEP_DEFAULTS = {
    "adhering": {"alpha": 0.9, "lambda": 1.0, "prefactor": 12.0, "n": [12, 24, 48, 96], "k": 5,
                 "eps_per_h": 1.6, "n_long": 4, "resolvent": True},
    "fading": {"lambda": 0.5, "n": [16, 32, 64, 128], "k": 6, "eps_per_h": 1.6, "n_long": 4, "resolvent": True},
}


def load_sweep_config(path) -> dict:
    """Read and validate a sweep configuration (JSON object).

    Keys: ``family`` ("adhering" or "fading", required), ``n`` (grid sizes,
    increasing) or ``eps`` (decreasing), ``k``, ``alpha``, ``lambda``,
    ``prefactor``, ``eps_per_h``, ``n_long``, ``resolvent``, ``seed``.
    """
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ValidationError("config", f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError("config", f"not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValidationError("config", "top level must be an object")
    family = raw.get("family")
    if family not in SWEEP_DEFAULTS:
        raise ValidationError("family", f"expected one of {sorted(SWEEP_DEFAULTS)}, got {family!r}")
    cfg = dict(SWEEP_DEFAULTS[family], family=family, seed=0)
    unknown = set(raw) - set(cfg) - {"eps"}
    if unknown:
        raise ValidationError(sorted(unknown)[0], "unknown configuration key")
    cfg.update(raw)
    if "eps" in raw:
        eps = raw["eps"]
        if not isinstance(eps, list) or not eps or not all(isinstance(e, (int, float)) and e > 0 for e in eps):
            raise ValidationError("eps", "must be a nonempty list of positive numbers")
        cfg["n"] = [int(round(cfg["eps_per_h"] / e)) for e in eps]
        del cfg["eps"]
    n = cfg["n"]
    if not isinstance(n, list) or not n or not all(isinstance(v, int) and v >= 8 for v in n):
        raise ValidationError("n", "must be a nonempty list of integers >= 8")
    if any(b <= a for a, b in zip(n, n[1:])):
        raise ValidationError("n", "grid sizes must increase (eps decreasing)")
    if not isinstance(cfg["k"], int) or cfg["k"] < 1:
        raise ValidationError("k", "must be a positive integer")
    for key in ("lambda", "eps_per_h") + (("alpha", "prefactor") if family == "adhering" else ()):
        if not isinstance(cfg[key], (int, float)) or cfg[key] <= 0 and key != "alpha":
            raise ValidationError(key, "must be a positive number")
    if family == "adhering" and not 0 <= cfg["alpha"] < 1:
        raise ValidationError("alpha", "must lie in [0, 1)")
    if not isinstance(cfg["n_long"], int) or cfg["n_long"] < 4:
        raise ValidationError("n_long", "must be an integer >= 4")
    return cfg


def run_sweep(cfg: dict) -> spectra.ConvergenceStudy:
    eps_list = [cfg["eps_per_h"] / n for n in cfg["n"]]
    if cfg["family"] == "adhering":
        def builder(eps):
            return spectra.adhering_two_tori(eps, alpha=cfg["alpha"], lam=cfg["lambda"], prefactor=cfg["prefactor"],
                                             eps_per_h=cfg["eps_per_h"], n_long=cfg["n_long"])
    else:
        def builder(eps):
            return spectra.fading_torus(eps, lam=cfg["lambda"], eps_per_h=cfg["eps_per_h"], n_long=cfg["n_long"])
    study = spectra.sweep(builder, eps_list, cfg["k"], resolvent=cfg["resolvent"])
    study.meta = {"family": cfg["family"], "limit": "identified" if cfg["family"] == "adhering" else "base"}
    return study


def cmd_sweep(args) -> dict:
    cfg = load_sweep_config(args.config)
    np.random.seed(cfg["seed"])
    study = run_sweep(cfg)
    out = _output_dir(args.output_dir)
    stem = Path(args.config).stem
    traj = out / f"{stem}_trajectories.csv"
    with traj.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "index", "eigenvalue", "limit_eigenvalue", "distance", "resolvent_distance", "vertices"])
        for i, eps in enumerate(study.eps_values):
            rd = study.resolvent_distances[i]
            for j in range(cfg["k"]):
                w.writerow([fmt(eps), j, fmt(study.eigenvalues[i][j]), fmt(study.limit_eigenvalues[i][j]),
                            fmt(study.distances[i][j]), "" if rd is None else fmt(rd), study.vertex_counts[i]])
    rates = [r for r in study.fitted_rates if math.isfinite(r)]
    summary = {
        "best_rate": max(rates) if rates else None,
        "fitted_rates": study.fitted_rates,
        "fit_residuals": study.fit_residuals,
        "error_reduction": study.error_reduction(),
        "resolvent_distances": study.resolvent_distances,
        "limit": study.meta["limit"],
        "trajectories_csv": str(traj),
    }
    record = {"command": "sweep", "config": cfg, "result": summary}
    (out / f"{stem}_summary.json").write_text(json.dumps(_clean(record), indent=2, sort_keys=True) + "\n")
    return record


# ---------------------------------------------------------------- verify suites


def _verify_bessel():
    checks = []
    for nu in (0.0, 0.5, 1.0, 2.5, 4.0):
        for x in (1e-3, 0.1, 1.0, 10.0, 40.0):
            i_rel = abs(bessel.bessel_i(nu, x) / bessel.i_series(nu, x) - 1)
            k_rel = abs(bessel.bessel_k(nu, x) / bessel.k_integral(nu, x) - 1)
            checks.append(max(i_rel, k_rel))
    worst = max(checks)
    return worst < 1e-10, {"worst_relative_error": worst, "cases": len(checks)}


def _verify_bounds():
    rng = np.random.default_rng(0)
    bad = 0
    for _ in range(2000):
        mu = float(rng.exponential(3.0))
        d = handles.ModeBoundaryData(mu, complex(*rng.normal(size=2)), complex(*rng.normal(size=2)))
        bad += handles.mode_l2_norm_sq(mu, d) > handles.mode_l2_bound(mu, d) * (1 + 1e-12)
        bad += handles.mode_energy_sq(mu, d) > handles.mode_energy_bound(mu, d) * (1 + 1e-12)
    for m in range(2, 11):
        constants.verify_muf(m, 50)
    return bad == 0, {"violations": int(bad), "samples": 2000}


def _verify_regimes():
    ok = regimes.alpha_star(3) == Fraction(1, 15)
    mism = 0
    for m in (2, 3, 4):
        mism += len(regimes.rasterize(m, "adhering", resolution=50)["mismatches"])
    return ok and mism == 0, {"alpha_star_3": regimes.alpha_star(3), "raster_mismatches": mism}


def _verify_constants():
    worst = 0.0
    for m in (2, 3, 4, 5):
        for r, eta in ((0.01, 0.3), (0.1, 0.4), (0.5, 2.0)):
            got = constants.oracle_trace_constants(m, r, eta)
            want = (constants.trace_const_annulus(m, r, eta), constants.trace_const_ball(m, r),
                    constants.trace_const_full(m, r, eta))
            worst = max([worst] + [abs(g / w - 1) for g, w in zip(got, want)])
    return worst < 1e-6, {"worst_relative_error": worst}


def _verify_spectra():
    vals = spectra.eigenvalues(spectra.build_base("torus", 16), 5)
    exact = (4.0 / (1 / 16) ** 2) * math.sin(math.pi / 16) ** 2
    err = float(np.max(np.abs(vals[1:] - exact)))
    return abs(vals[0]) < 1e-9 and err < 1e-8, {"max_error": err}


SUITES = {
    "bessel": _verify_bessel,
    "bounds": _verify_bounds,
    "regimes": _verify_regimes,
    "constants": _verify_constants,
    "spectra": _verify_spectra,
}


def cmd_verify(args) -> dict:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    report = {}
    for name in names:
        t0 = time.perf_counter()
        ok, detail = SUITES[name]()
        report[name] = {"pass": bool(ok), "detail": detail, "seconds": round(time.perf_counter() - t0, 3)}
    return {"command": "verify", "config": {"suite": args.suite},
            "result": {"pass": all(r["pass"] for r in report.values()), "suites": report}}


# ---------------------------------------------------------------- parser


def _add_manifold(p):
    g = p.add_argument_group("manifold constants")
    g.add_argument("--N", type=int, default=1)
    g.add_argument("--K", type=float, default=1.0)
    g.add_argument("--r0", type=_positive_float("r0"), default=1.0)
    g.add_argument("--r1", type=_positive_float("r1"), default=0.5)
    g.add_argument("--kappa0", type=float, default=0.0)
    g.add_argument("--C-ext", dest="C_ext", type=float, default=1.0)
    g.add_argument("--C-nbhd", dest="C_nbhd", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="thinhandles", description="Rate constants, regimes and spectral checks for thin handles.")
    ap.add_argument("--output", help="also write the JSON record to this file")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="trace and non-concentration constants")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--r", type=_positive_float("r"), required=True)
    p.add_argument("--eta", type=_positive_float("eta"), required=True)
    p.add_argument("--oracle", action="store_true", help="cross-check against the radial ODE")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("regime", help="classify a parameter point")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--alpha", type=_rational("alpha"), required=True)
    p.add_argument("--lambda", dest="lam", type=_rational("lambda"), required=True)
    p.add_argument("--scale", choices=["power", "log"], default="power")
    p.add_argument("--alpha4", type=_rational("alpha4"), default=regimes.DEFAULT_ALPHA4)
    p.add_argument("--convention", choices=["corollary", "proof"], default="corollary")
    p.add_argument("--eps", type=_positive_float("eps"), help="evaluate the explicit error terms at this radius")
    _add_manifold(p)
    p.set_defaults(func=cmd_regime)

    p = sub.add_parser("region", help="named points, polygons and an applicability raster")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--figure", choices=list(regimes.FIGURES), default="adhering")
    p.add_argument("--resolution", type=int, default=0, help="raster cells per unit (0 = no raster)")
    p.add_argument("--alpha4", type=_rational("alpha4"), default=regimes.DEFAULT_ALPHA4)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("delta", help="the seven rate constants for one geometry")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--eps", type=_positive_float("eps"), required=True)
    p.add_argument("--ell", type=_positive_float("ell"), required=True)
    p.add_argument("--eta", type=_positive_float("eta"), required=True)
    p.add_argument("--alpha", type=_rational("alpha"))
    p.add_argument("--lambda", dest="lam", type=_rational("lambda"))
    p.add_argument("--asymptotic", action="store_true", help="use leading terms instead of exact constants")
    _add_manifold(p)
    p.set_defaults(func=cmd_delta)

    p = sub.add_parser("sweep", help="spectral convergence sweep from a JSON config")
    p.add_argument("config")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run an invariant suite")
    p.add_argument("suite", choices=list(SUITES) + ["all"])
    p.set_defaults(func=cmd_verify)
    return ap


def _error_record(args, kind, exc):
    rec = {"command": getattr(args, "command", None), "error": {"kind": kind, "message": str(exc)}}
    if isinstance(exc, ValidationError):
        rec["error"]["field"] = exc.field
    if isinstance(exc, RangeError):
        rec["error"] |= {"parameter": exc.parameter, "value": exc.value, "limit": exc.limit}
    if isinstance(exc, NumericalError):
        rec["error"]["achieved"] = exc.achieved
    return rec


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        record = args.func(args)
    except (NumericalError, ArithmeticError) as exc:
        print(json.dumps(_clean(_error_record(args, "numerical", exc)), sort_keys=True), file=sys.stderr)
        return EXIT_NUMERIC
    except (HandleError, ValueError) as exc:
        print(json.dumps(_clean(_error_record(args, "validation", exc)), sort_keys=True), file=sys.stderr)
        return EXIT_INVALID
    record = {"schema": SCHEMA, **record}
    _emit(record, args.output)
    if record["command"] == "verify" and not record["result"]["pass"]:
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
