"""Deterministic reference solver, decay-envelope checks, and the
noise-homogenization experiments comparing the stochastic Galerkin paths
against the deterministic system with enhanced viscosity nu1 = 1 + (3/5) nu.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig
from .corrector import perp_blocks
from .field import SpectralField, mode_set, sobolev_norm
from .lattice import theta_shell
from .sde import (GalerkinIntegrator, TimeSeries, driver_for,
                  initial_condition, theta_from_config)


def enhanced_viscosity(nu: float) -> float:
    """nu1 = 1 + (3/5) nu, the homogenized viscosity of the noise family."""
    return 1.0 + 0.6 * nu


def small_data_radius(C0: float) -> float:
    """r0 = (2 pi^2)^{1/4} / C0, the small-data threshold."""
    return float((2 * np.pi ** 2) ** 0.25 / C0)


def nu_lower_bound(C0: float, R0: float) -> float:
    """Noise intensity making R0-sized data effectively small:
    nu >= (5/3) (C0 R0 / (2 pi^2)^{1/4} - 1)."""
    return float(5.0 / 3.0 * (C0 * R0 / (2 * np.pi ** 2) ** 0.25 - 1.0))


def lemma43_envelope(t, norm0: float, nu1: float, C0: float):
    """Closed-form decay envelope for small-data deterministic solutions.

    [ (|xi0|^-4 - C0^4/(4 pi^2 nu1^4)) e^{8 pi^2 nu1 t}
      + C0^4/(4 pi^2 nu1^4) ]^{-1/4}; requires the bracket positive,
    i.e. |xi0| below the global-existence threshold.
    """
    t = np.asarray(t, dtype=np.float64)
    c = C0 ** 4 / (4 * np.pi ** 2 * nu1 ** 4)
    lead = norm0 ** -4 - c
    if lead <= 0:
        raise ValueError("initial norm above the envelope's validity range")
    return (lead * np.exp(8 * np.pi ** 2 * nu1 * t) + c) ** -0.25


def lemma43_uniform_bound(nu1: float, C0: float) -> float:
    """The envelope never exceeds sqrt(2 pi) nu1 / C0."""
    return float(np.sqrt(2 * np.pi) * nu1 / C0)


def prop45_envelope(t, norm0: float, nu1: float = 1.0):
    """Exponential small-data envelope 2^{1/4} |xi0| e^{-2 pi^2 nu1 t}."""
    t = np.asarray(t, dtype=np.float64)
    return 2 ** 0.25 * norm0 * np.exp(-2 * np.pi ** 2 * nu1 * t)


def deterministic_solve(nu1: float, xi0: SpectralField, T: float, dt: float,
                        observer=None, guard: float = 1e6) -> TimeSeries:
    """Galerkin solution of the deterministic vorticity equation with
    viscosity nu1 (no noise, no cutoff)."""
    integ = GalerkinIntegrator(xi0.ms, None, 0.0, dt, visc=nu1,
                               cutoff=False, guard=guard)
    return integ.run(xi0, T, observer=observer)


@dataclass
class DecayReport:
    t: np.ndarray
    norm: np.ndarray
    envelope43: np.ndarray
    envelope45: np.ndarray
    margin43: np.ndarray
    margin45: np.ndarray
    passed: bool

    def to_dict(self):
        return {"passed": bool(self.passed),
                "min_margin43": float(self.margin43.min()),
                "min_margin45": float(self.margin45.min())}


def decay_check(xi0: SpectralField, nu1: float, T: float, dt: float,
                C0: float = 1.0) -> DecayReport:
    """Run the deterministic solver and compare against both envelopes."""
    series = deterministic_solve(nu1, xi0, T, dt)
    t = np.asarray(series.t)
    norm = np.sqrt(np.asarray(series.norm_sq))
    n0 = xi0.norm()
    e43 = lemma43_envelope(t, n0, nu1, C0)
    e45 = prop45_envelope(t, n0, nu1)
    m43, m45 = e43 - norm, e45 - norm
    return DecayReport(t, norm, e43, e45, m43, m45,
                       passed=bool(m43.min() >= 0 and m45.min() >= 0))


_BLOCK_CACHE: dict = {}


def shell_blocks(M: int, N: int, gamma: float, nu: float) -> np.ndarray:
    """Per-process cache of the corrector blocks (the expensive setup)."""
    key = (M, N, gamma, nu)
    if key not in _BLOCK_CACHE:
        _BLOCK_CACHE[key] = perp_blocks(theta_shell(N, gamma), nu, mode_set(M))
    return _BLOCK_CACHE[key]


class _TrajectoryStore:
    """Observer that keeps coefficient snapshots of every step."""

    def __init__(self):
        self.t = []
        self.coeff = []

    def __call__(self, i, t, xi):
        self.t.append(t)
        self.coeff.append(xi.coeff.copy())


class _DistanceAccumulator:
    """Observer computing online distances against a stored reference."""

    def __init__(self, ref: _TrajectoryStore, ms, delta: float):
        self.ref = ref
        self.ms = ms
        self.delta = delta
        self.sq_dists = []
        self.sup_hdelta = 0.0

    def __call__(self, i, t, xi):
        diff = SpectralField(self.ms, xi.coeff - self.ref.coeff[i])
        self.sq_dists.append(diff.norm() ** 2)
        self.sup_hdelta = max(self.sup_hdelta,
                              sobolev_norm(diff, -self.delta))


def _run_sample(cfg_data: dict, sample: int) -> dict:
    """All ladder points for one Monte-Carlo sample (worker entry point)."""
    cfg = SimConfig(cfg_data)
    ms = mode_set(cfg["M"])
    nu1 = enhanced_viscosity(cfg["nu"])
    xi0 = initial_condition(cfg, sample)

    ref = _TrajectoryStore()
    deterministic_solve(nu1, xi0, cfg["T"], cfg["dt"], observer=ref)

    out = {"sample": sample, "per_N": {}}
    for N in cfg["N_ladder"]:
        theta = theta_shell(N, cfg["theta.gamma"])
        blocks = shell_blocks(cfg["M"], N, cfg["theta.gamma"], cfg["nu"])
        driver = driver_for(theta, cfg, N, sample)
        integ = GalerkinIntegrator(ms, theta, cfg["nu"], cfg["dt"],
                                   R=cfg["R"], delta=cfg["delta"],
                                   driver=driver, blocks=blocks)
        acc = _DistanceAccumulator(ref, ms, cfg["delta"])
        series = integ.run(xi0, cfg["T"], observer=acc)
        sup_state = max(series.sob_minus_delta)
        dist_l2h = float(np.sqrt(np.trapezoid(acc.sq_dists, series.t)))
        out["per_N"][N] = {
            "dist_l2h": dist_l2h,
            "dist_sup_hdelta": float(acc.sup_hdelta),
            "tau_geq_T": bool(sup_state < cfg["R"]),
            "seed_stream": [2, N, sample],
        }
    return out


@dataclass
class ExperimentReport:
    parameters: dict
    samples: list = field(default_factory=list)   # per-sample dicts
    summary: dict = field(default_factory=dict)   # per-N aggregates
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"parameters": self.parameters, "summary": self.summary,
                "samples": self.samples, **self.extra}


def _aggregate(cfg: SimConfig, results: list) -> ExperimentReport:
    results = sorted(results, key=lambda r: r["sample"])
    summary = {}
    for N in cfg["N_ladder"]:
        dl = sorted(r["per_N"][N]["dist_l2h"] for r in results)
        ds = sorted(r["per_N"][N]["dist_sup_hdelta"] for r in results)
        stop = [r["per_N"][N]["tau_geq_T"] for r in results]
        summary[str(N)] = {
            "dist_l2h_q25": float(np.quantile(dl, 0.25)),
            "dist_l2h_median": float(np.quantile(dl, 0.5)),
            "dist_l2h_q75": float(np.quantile(dl, 0.75)),
            "dist_sup_hdelta_median": float(np.quantile(ds, 0.5)),
            "stopping_fraction": float(np.mean(stop)),
        }
    params = {"M": cfg["M"], "nu": cfg["nu"], "nu1": enhanced_viscosity(cfg["nu"]),
              "R": cfg["R"], "R0": cfg["R0"], "delta": cfg["delta"],
              "dt": cfg["dt"], "T": cfg["T"], "seed": cfg["seed"],
              "samples": cfg["samples"], "N_ladder": list(cfg["N_ladder"]),
              "C0": cfg["C0"], "gamma": cfg["theta.gamma"]}
    return ExperimentReport(params, results, summary)


def scaling_limit_experiment(cfg: SimConfig) -> ExperimentReport:
    """Distances of stochastic paths to the nu1-deterministic reference,
    per noise shell N, with stopping-time fractions."""
    samples = range(cfg["samples"])
    workers = cfg["scheme.parallelism"]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_sample,
                                  [cfg.data] * cfg["samples"], samples))
    else:
        results = [_run_sample(cfg.data, s) for s in samples]
    return _aggregate(cfg, results)


def long_horizon_experiment(cfg: SimConfig,
                            extra_horizon: float = 1.0) -> ExperimentReport:
    """Small-norm hand-off: find a time in [T-1, T] with norm below r0 on
    each surviving path and continue without cutoff from it."""
    if cfg["T"] <= 1.0:
        raise ValueError("long-horizon experiment needs T > 1")
    ms = mode_set(cfg["M"])
    nu1 = enhanced_viscosity(cfg["nu"])
    r0 = small_data_radius(cfg["C0"])
    N = cfg["N_ladder"][-1]
    theta = theta_shell(N, cfg["theta.gamma"])
    blocks = shell_blocks(cfg["M"], N, cfg["theta.gamma"], cfg["nu"])
    tail_bound = 2 * cfg["R0"] * np.exp(-2 * np.pi ** 2 * nu1 * (cfg["T"] - 1))

    records = []
    det_tail_ok = True
    for sample in range(cfg["samples"]):
        xi0 = initial_condition(cfg, sample)
        det = deterministic_solve(nu1, xi0, cfg["T"], cfg["dt"])
        t = np.asarray(det.t)
        tail = t >= cfg["T"] - 1
        det_tail = float(np.sqrt(np.trapezoid(
            np.asarray(det.norm_sq)[tail], t[tail])))
        det_tail_ok &= det_tail <= tail_bound

        driver = driver_for(theta, cfg, N, sample)
        store = _TrajectoryStore()
        integ = GalerkinIntegrator(ms, theta, cfg["nu"], cfg["dt"],
                                   R=cfg["R"], delta=cfg["delta"],
                                   driver=driver, blocks=blocks)
        series = integ.run(xi0, cfg["T"], observer=store)
        rec = {"sample": sample, "det_tail_l2": det_tail,
               "tau_geq_T": bool(max(series.sob_minus_delta) < cfg["R"])}
        if rec["tau_geq_T"]:
            ts = np.asarray(series.t)
            norms = np.sqrt(np.asarray(series.norm_sq))
            ok = np.nonzero((ts >= cfg["T"] - 1) & (norms <= r0))[0]
            rec["handoff_found"] = bool(len(ok))
            if len(ok):
                i = int(ok[0])
                rec["handoff_t"] = float(ts[i])
                rec["handoff_norm"] = float(norms[i])
                cont = GalerkinIntegrator(ms, theta, cfg["nu"], cfg["dt"],
                                          delta=cfg["delta"], cutoff=False,
                                          driver=driver, blocks=blocks)
                restart = SpectralField(ms, store.coeff[i].copy())
                cont_series = cont.run(restart, extra_horizon)
                env = prop45_envelope(np.asarray(cont_series.t), norms[i])
                margin = env - np.sqrt(np.asarray(cont_series.norm_sq))
                rec["continuation_min_margin"] = float(margin.min())
                rec["continuation_bounded"] = bool(margin.min() >= 0)
        records.append(rec)

    report = _aggregate_long(cfg, records)
    report.extra["det_tail_bound"] = float(tail_bound)
    report.extra["det_tail_ok"] = bool(det_tail_ok)
    report.extra["r0"] = r0
    report.extra["nu_lower_bound"] = nu_lower_bound(cfg["C0"], cfg["R0"])
    return report


def _aggregate_long(cfg: SimConfig, records: list) -> ExperimentReport:
    surviving = [r for r in records if r.get("tau_geq_T")]
    handed = [r for r in surviving if r.get("handoff_found")]
    bounded = [r for r in handed if r.get("continuation_bounded")]
    params = {"M": cfg["M"], "nu": cfg["nu"], "T": cfg["T"], "dt": cfg["dt"],
              "seed": cfg["seed"], "samples": cfg["samples"], "C0": cfg["C0"],
              "N": cfg["N_ladder"][-1]}
    summary = {"surviving": len(surviving), "handoff_found": len(handed),
               "continuation_bounded": len(bounded), "total": len(records)}
    return ExperimentReport(params, records, summary)
