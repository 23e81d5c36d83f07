"""Command-line surface: config ingestion, subcommands, reproducible output.

Exit codes: 0 all enabled checks pass; 1 a check failed; 2 usage or
configuration error; 3 runtime/numerical failure.  Each run writes one
directory holding report.json (with metadata: config hash, RNG id, seed,
code version) plus flat CSV files; CSV bodies are byte-identical across
reruns with the same config and seed.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, SimConfig
from .corrector import (coefficient_covariance, limit_defect, prop54_sum)
from .experiments import (decay_check, enhanced_viscosity,
                          long_horizon_experiment, scaling_limit_experiment,
                          small_data_radius)
from .field import mode_set, random_divergence_free
from .lattice import frame, theta_shell
from .sde import RNG_ALGORITHM, IntegrationFailure, simulate

EXIT_PASS, EXIT_CHECK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows):
    """Comma-separated, '.' decimal, header row, LF endings."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_report(outdir: Path, cfg: SimConfig, body: dict):
    meta = {"config_hash": cfg.hash(), "rng_algorithm": RNG_ALGORITHM,
            "seed": cfg["seed"], "code_version": __version__,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()}
    doc = {"metadata": meta, "config": cfg.data, **body}
    with open(outdir / "report.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _outdir(args, cfg: SimConfig, name: str) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        root = Path(os.environ.get("SPECVORT_OUTPUT_ROOT", "runs"))
        out = root / f"{name}-{cfg.hash()[:12]}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _theta_of(cfg: SimConfig):
    from .sde import theta_from_config
    theta = theta_from_config(cfg)
    if theta is None:
        raise ConfigError(["theta.kind: this subcommand needs noise weights"])
    return theta


def cmd_verify_identities(cfg: SimConfig, args) -> int:
    theta = _theta_of(cfg)
    cov = coefficient_covariance(theta)
    target = 2.0 / 3.0 * theta.l2 ** 2 * np.eye(3)
    cov_dev = float(np.max(np.abs(cov - target)))
    l, beta = tuple(args.l), args.beta
    a = frame(l)[beta - 1]
    rows = []
    ok = cov_dev <= 1e-12 * theta.l2 ** 2
    defect = limit_defect(cfg["theta.N"], cfg["theta.gamma"], 1.0, l, beta)
    p54 = float(np.linalg.norm(
        prop54_sum(cfg["theta.N"], cfg["theta.gamma"], l, beta, theta=theta)
        - 4.0 / 15.0 * a))
    rows.append((cfg["theta.N"], cfg["theta.gamma"],
                 "%d %d %d" % tuple(l), beta, defect, p54, cov_dev))
    outdir = _outdir(args, cfg, "verify-identities")
    write_csv(outdir / "identities.csv",
              ("N", "gamma", "l", "beta", "defect", "prop54_error",
               "covariance_max_offdiag"), rows)
    write_report(outdir, cfg, {"checks": {"covariance_ok": bool(ok),
                                          "covariance_deviation": cov_dev}})
    print(f"covariance deviation {cov_dev:.3e} "
          f"({'ok' if ok else 'FAIL'}); outputs in {outdir}")
    return EXIT_PASS if ok else EXIT_CHECK


def cmd_corrector_limit(cfg: SimConfig, args) -> int:
    l, beta = tuple(args.l), args.beta
    a = frame(l)[beta - 1]
    rows = []
    defects = []
    for N in args.N:
        theta = theta_shell(N, cfg["theta.gamma"])
        cov = coefficient_covariance(theta)
        cov_dev = float(np.max(np.abs(
            cov - 2.0 / 3.0 * theta.l2 ** 2 * np.eye(3))))
        defect = limit_defect(N, cfg["theta.gamma"], 1.0, l, beta)
        p54 = float(np.linalg.norm(
            prop54_sum(N, cfg["theta.gamma"], l, beta, theta=theta)
            - 4.0 / 15.0 * a))
        defects.append(defect)
        rows.append((N, cfg["theta.gamma"], "%d %d %d" % tuple(l), beta,
                     defect, p54, cov_dev))
    outdir = _outdir(args, cfg, "corrector-limit")
    write_csv(outdir / "limit.csv",
              ("N", "gamma", "l", "beta", "defect", "prop54_error",
               "covariance_max_offdiag"), rows)
    decreasing = all(b < a for a, b in zip(defects, defects[1:]))
    write_report(outdir, cfg, {"checks": {"defect_strictly_decreasing":
                                          bool(decreasing)},
                               "defects": defects})
    print(f"defects {['%.3e' % d for d in defects]} "
          f"({'decreasing' if decreasing else 'NOT decreasing'}); "
          f"outputs in {outdir}")
    return EXIT_PASS if decreasing else EXIT_CHECK


def cmd_simulate(cfg: SimConfig, args) -> int:
    outdir = _outdir(args, cfg, "simulate")
    from .sde import TimeSeries
    bound_ok = True
    for sample in range(cfg["samples"]):
        series = simulate(cfg, sample=sample)
        write_csv(outdir / f"series_{sample:03d}.csv",
                  TimeSeries.COLUMNS, series.rows())
        # pathwise energy bound |xi|^2 + int |grad xi|^2 <= |xi0|^2 + C t
        t = np.asarray(series.t)
        e = np.asarray(series.norm_sq)
        diss = np.concatenate([[0.0], np.cumsum(
            0.5 * (np.asarray(series.grad_norm_sq)[1:]
                   + np.asarray(series.grad_norm_sq)[:-1]) * np.diff(t))])
        excess = (e + diss - e[0])[1:] / t[1:]
        bound_ok &= bool(np.isfinite(excess).all())
    write_report(outdir, cfg, {"checks": {"energy_bound_finite": bool(bound_ok)}})
    print(f"{cfg['samples']} series written to {outdir}")
    return EXIT_PASS if bound_ok else EXIT_CHECK


def cmd_decay(cfg: SimConfig, args) -> int:
    nu1 = enhanced_viscosity(cfg["nu"])
    r0 = small_data_radius(cfg["C0"])
    ms = mode_set(cfg["M"])
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(cfg["seed"], spawn_key=(1, 0))))
    xi0 = random_divergence_free(ms, rng, norm=0.5 * r0,
                                 max_mode=min(2, cfg["M"]))
    rep = decay_check(xi0, nu1, cfg["T"], cfg["dt"], C0=cfg["C0"])
    outdir = _outdir(args, cfg, "decay")
    rows = zip(rep.t, rep.norm, rep.envelope43, rep.envelope45,
               rep.margin43, rep.margin45)
    write_csv(outdir / "decay.csv",
              ("t", "norm", "envelope_closed_form", "envelope_exponential",
               "margin_closed_form", "margin_exponential"), rows)
    write_report(outdir, cfg, {"checks": rep.to_dict(),
                               "r0": r0, "nu1": nu1})
    print(f"decay margins >= 0: {rep.passed}; outputs in {outdir}")
    return EXIT_PASS if rep.passed else EXIT_CHECK


def cmd_scaling_limit(cfg: SimConfig, args) -> int:
    rep = scaling_limit_experiment(cfg)
    outdir = _outdir(args, cfg, "scaling-limit")
    rows = []
    for r in rep.samples:
        for N, d in sorted(r["per_N"].items()):
            rows.append((N, r["sample"], d["dist_l2h"],
                         d["dist_sup_hdelta"], d["tau_geq_T"]))
    write_csv(outdir / "distances.csv",
              ("N", "sample", "dist_l2h", "dist_sup_hdelta", "tau_geq_T"),
              rows)
    srows = [(N, s["dist_l2h_q25"], s["dist_l2h_median"], s["dist_l2h_q75"],
              s["dist_sup_hdelta_median"], s["stopping_fraction"])
             for N, s in rep.summary.items()]
    write_csv(outdir / "summary.csv",
              ("N", "dist_l2h_q25", "dist_l2h_median", "dist_l2h_q75",
               "dist_sup_hdelta_median", "stopping_fraction"), srows)
    medians = [rep.summary[str(N)]["dist_l2h_median"]
               for N in cfg["N_ladder"]]
    ok = all(b <= a for a, b in zip(medians, medians[1:]))
    write_report(outdir, cfg, {"summary": rep.summary,
                               "checks": {"median_non_increasing": bool(ok)}})
    print(f"median distances {['%.3e' % m for m in medians]} "
          f"({'non-increasing' if ok else 'NOT non-increasing'}); "
          f"outputs in {outdir}")
    return EXIT_PASS if ok else EXIT_CHECK


def cmd_long_horizon(cfg: SimConfig, args) -> int:
    rep = long_horizon_experiment(cfg)
    outdir = _outdir(args, cfg, "long-horizon")
    rows = [(r["sample"], r["det_tail_l2"], r["tau_geq_T"],
             r.get("handoff_found", False), r.get("handoff_t", ""),
             r.get("handoff_norm", ""),
             r.get("continuation_min_margin", ""))
            for r in rep.samples]
    write_csv(outdir / "paths.csv",
              ("sample", "det_tail_l2", "tau_geq_T", "handoff_found",
               "handoff_t", "handoff_norm", "continuation_min_margin"), rows)
    s = rep.summary
    ok = (rep.extra["det_tail_ok"]
          and s["handoff_found"] == s["surviving"]
          and s["continuation_bounded"] == s["handoff_found"])
    write_report(outdir, cfg, {"summary": s, "thresholds": {
        "r0": rep.extra["r0"], "nu_lower_bound": rep.extra["nu_lower_bound"],
        "det_tail_bound": rep.extra["det_tail_bound"]},
        "checks": {"all_pass": bool(ok)}})
    print(f"surviving {s['surviving']}/{s['total']}, handoffs "
          f"{s['handoff_found']}, bounded continuations "
          f"{s['continuation_bounded']}; outputs in {outdir}")
    return EXIT_PASS if ok else EXIT_CHECK


def _int_list(text: str):
    return [int(x) for x in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="specvort",
        description="Spectral Galerkin lab for vorticity transport noise")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="output directory (default: derived)")
        sp.add_argument("overrides", nargs="*", metavar="KEY=VALUE",
                        help="dotted-path config overrides")

    sp = sub.add_parser("verify-identities",
                        help="exact covariance/corrector identities")
    sp.add_argument("--l", type=_int_list, default=[1, 0, 0])
    sp.add_argument("--beta", type=int, choices=(1, 2), default=1)
    common(sp)
    sp = sub.add_parser("corrector-limit",
                        help="corrector convergence ladder")
    sp.add_argument("--N", type=_int_list, default=[4, 8, 16, 32])
    sp.add_argument("--l", type=_int_list, default=[1, 0, 0])
    sp.add_argument("--beta", type=int, choices=(1, 2), default=1)
    common(sp)
    for name in ("simulate", "scaling-limit", "decay", "long-horizon"):
        common(sub.add_parser(name))
    return p


COMMANDS = {
    "verify-identities": cmd_verify_identities,
    "corrector-limit": cmd_corrector_limit,
    "simulate": cmd_simulate,
    "decay": cmd_decay,
    "scaling-limit": cmd_scaling_limit,
    "long-horizon": cmd_long_horizon,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_PASS
    try:
        cfg = (SimConfig.from_file(args.config) if args.config
               else SimConfig())
        if getattr(args, "overrides", None):
            cfg = cfg.with_overrides(args.overrides)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrationFailure, ValueError, FloatingPointError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
