"""Command line entry point: one experiment per invocation.

Subcommands cover the deterministic solvers (steady, flux, transport,
damped), the particle simulator (mc), and the verification experiments
(rates, lln).  Every run writes CSV series plus a JSON manifest with a
config echo, library versions, seeds, content hashes, and wall-clock.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import math
import os
import pathlib
import sys
import time

import numpy as np

from . import analysis, io
from .config import ConfigError, SimConfig
from .flux_solver import deviation_flux, mean_initial_density, solve_flux
from .geometry import Wall
from .montecarlo import advance, density_snapshot, empirical_flux, \
    init_ensemble
from .steady_state import SteadyState, steady_boundary_flux
from .transport import snapshot as field_snapshot
from .transport import solve_damped_flux


def _need_steady(cfg):
    return cfg.initial.get("kind") == "scaled_steady"


def _boundary_labels(d, n):
    if d == 1:
        return np.array([0.0, 1.0])
    return 2.0 * math.pi * (np.arange(n) + 0.5) / n


def _run_steady(cfg, out, written):
    profile = cfg.build_profile()
    sd = SteadyState(profile, cfg.alpha, series_tol=cfg.series_tol)
    if cfg.d == 1:
        boundary = np.array([0.0, 1.0])
        temps = np.array([profile.t_left, profile.t_right])
        flux = np.array([steady_boundary_flux(sd, Wall.LEFT),
                         steady_boundary_flux(sd, Wall.RIGHT)])
    else:
        angles = 2.0 * math.pi * np.arange(64) / 64
        boundary = angles
        temps = profile.value(angles)
        flux = np.array([steady_boundary_flux(sd, th) for th in angles])
    path = out / "steady.csv"
    io.write_columns(path, ["boundary", "temperature", "flux"],
                     [boundary, temps, flux])
    written.append(path)
    return {"C_S": sd.c_s, "flux_mean": float(np.mean(flux)),
            "flux_spread": float(np.max(flux) - np.min(flux))}


def _solve_and_write_flux(cfg, out, written, name="flux"):
    profile = cfg.build_profile()
    initial = cfg.build_initial()
    sd = SteadyState(profile, cfg.alpha, series_tol=cfg.series_tol) \
        if _need_steady(cfg) else None
    scfg = cfg.solver_config(profile=profile, initial=initial)
    dmp = cfg.build_damping()
    if dmp is None:
        hist = solve_flux(scfg)
    else:
        hist = solve_damped_flux(scfg, dmp)
    boundary = hist.theta if cfg.d == 2 else np.array([0.0, 1.0])
    path = out / f"{name}.csv"
    io.write_flux_csv(path, hist.times, boundary, hist.values)
    written.append(path)
    extra = {"residual_max": hist.meta.get("residual_max"),
             "flux_fingerprint": io.text_sha256(cfg.flux_fingerprint())}
    return hist, sd, extra


def _run_flux(cfg, out, written):
    _, _, extra = _solve_and_write_flux(cfg, out, written)
    return extra


def _run_damped(cfg, out, written):
    if cfg.damping is None:
        raise ConfigError("invalid configuration: damping: section "
                          "required by the damped subcommand")
    if cfg.damping.get("p_nu", 0.0) != 0.0:
        raise ConfigError("invalid configuration: damping.p_nu: the "
                          "deterministic damped solve requires p_nu = 0 "
                          "(velocity-dependent damping is Monte Carlo only)")
    _, _, extra = _solve_and_write_flux(cfg, out, written, name="damped_flux")
    extra["damping"] = dict(cfg.damping)
    return extra


def _reusable_flux(cfg, out):
    """Load a previously solved flux history when its manifest
    fingerprint and content hash both match the current config."""
    mpath = out / "flux_manifest.json"
    cpath = out / "flux.csv"
    if not (mpath.exists() and cpath.exists()):
        return None
    manifest = io.read_manifest(mpath)
    fp = io.text_sha256(cfg.flux_fingerprint())
    if manifest.get("flux_fingerprint") != fp:
        return None
    recorded = manifest.get("outputs", {}).get("flux.csv", {}).get("sha256")
    if recorded != io.file_sha256(cpath):
        return None
    return cpath


def _run_transport(cfg, out, written):
    opts = cfg.section("transport")
    profile = cfg.build_profile()
    initial = cfg.build_initial()
    sd = SteadyState(profile, cfg.alpha, series_tol=cfg.series_tol) \
        if _need_steady(cfg) else None
    reused = _reusable_flux(cfg, out)
    if reused is not None:
        meta = {"alpha": cfg.alpha, "profile": profile,
                "kind": initial.kind}
        hist = io.history_from_csv(reused, cfg.d, meta=meta)
        extra = {"flux_reused": True, "flux_sha256": io.file_sha256(reused)}
    else:
        hist, sd2, fx = _solve_and_write_flux(cfg, out, written)
        sd = sd if sd is not None else sd2
        extra = {"flux_reused": False,
                 "flux_fingerprint": fx["flux_fingerprint"],
                 "residual_max": fx["residual_max"]}
    times = opts["times"] or [cfg.t_max]
    snaps = [field_snapshot(hist, initial, float(t), steady=sd)
             for t in times]
    path = out / "transport.csv"
    io.write_snapshot_csv(path, snaps)
    written.append(path)
    extra["times"] = [float(t) for t in times]
    return extra


def _run_mc(cfg, out, written):
    opts = cfg.section("mc")
    profile = cfg.build_profile()
    initial = cfg.build_initial()
    sd = SteadyState(profile, cfg.alpha, series_tol=cfg.series_tol) \
        if _need_steady(cfg) else None
    ens = init_ensemble(initial, opts["n_particles"], cfg.seed, cfg.d,
                        steady=sd)
    w0 = ens.total_weight()
    tally = advance(ens, cfg.t_max, profile, cfg.alpha,
                    damping=cfg.build_damping(),
                    n_time_bins=opts["n_time_bins"],
                    n_boundary_bins=opts["n_boundary_bins"],
                    killing=opts["killing"])
    emp = empirical_flux(tally)
    boundary = _boundary_labels(cfg.d, emp.values.shape[1])
    path = out / "mc_flux.csv"
    io.write_flux_csv(path, emp.times, boundary, emp.values,
                      stderr=emp.stderr)
    written.append(path)
    centers, dens, derr = density_snapshot(ens)
    dpath = out / "mc_density.csv"
    io.write_columns(dpath, ["x", "density", "stderr"],
                     [centers, dens, derr])
    written.append(dpath)
    return {"n_particles": opts["n_particles"],
            "initial_weight": w0, "final_weight": ens.total_weight()}


def _run_rates(cfg, out, written):
    opts = cfg.section("rates")
    profile = cfg.build_profile()
    initial = cfg.build_initial()
    sd = SteadyState(profile, cfg.alpha, series_tol=cfg.series_tol)
    scfg = cfg.solver_config(profile=profile, initial=initial)
    hist = solve_flux(scfg)
    rho_star = mean_initial_density(initial, cfg.d)
    dev = deviation_flux(hist, rho_star, sd.c_s)
    series = np.max(np.abs(dev.values), axis=1)
    path = out / "rates.csv"
    io.write_columns(path, ["t", "deviation"], [hist.times, series])
    written.append(path)
    window = opts["window"] or [min(10.0, 0.2 * cfg.t_max), cfg.t_max]
    fit = analysis.fit_decay_rate(hist.times, series, window=window)
    c_fit, ok = analysis.envelope_check(hist.times, series, cfg.alpha,
                                        cfg.d)
    return {"window": [fit.t_lo, fit.t_hi], "exponent": fit.exponent,
            "amplitude": fit.amplitude, "fit_residual": fit.residual,
            "envelope_constant": c_fit, "envelope_ok": ok,
            "rho_star": rho_star, "C_S": sd.c_s}


def _run_lln(cfg, out, written):
    opts = cfg.section("lln")
    rows = analysis.lln_experiment(
        d=cfg.d, n_values=tuple(opts["n_values"]),
        m_values=tuple(opts["m_values"]),
        gamma_factors=tuple(opts["gamma_factors"]),
        trials=int(opts["trials"]), seed=cfg.seed)
    path = out / "lln.csv"
    io.write_columns(
        path, ["n", "m", "gamma", "empirical", "stderr", "bound", "ratio"],
        [[r.n for r in rows], [r.m for r in rows], [r.gamma for r in rows],
         [r.empirical for r in rows], [r.stderr for r in rows],
         [r.bound for r in rows], [r.ratio for r in rows]])
    written.append(path)
    return {"max_ratio": analysis.max_ratio(rows),
            "trials": int(opts["trials"])}


_RUNNERS = {"steady": _run_steady, "flux": _run_flux,
            "transport": _run_transport, "mc": _run_mc,
            "damped": _run_damped, "rates": _run_rates, "lln": _run_lln}


def _set_threads(n):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ[var] = str(n)


def _parse(argv):
    parser = argparse.ArgumentParser(
        prog="fmflow",
        description="Free molecular flow simulation toolkit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="JSON configuration file (defaults apply "
                        "when omitted)")
    common.add_argument("--out", metavar="DIR",
                        help="output directory (overrides config)")
    common.add_argument("--seed", type=int, metavar="N",
                        help="random seed (overrides config)")
    common.add_argument("--threads", type=int, metavar="N",
                        help="thread-pool size hint (best effort)")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"steady": "evaluate the explicit steady state and C_S",
             "flux": "solve the boundary-flux renewal equation",
             "transport": "moment fields from a solved flux history",
             "mc": "stochastic billiard particle simulation",
             "damped": "flux solve with constant collision damping",
             "rates": "decay-rate fit and envelope check",
             "lln": "flight-time law-of-large-numbers tail experiment"}
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser.parse_args(argv)


def run(cfg, command, out_dir=None):
    """Execute one subcommand; returns the manifest path."""
    out = pathlib.Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    t0 = time.perf_counter()
    try:
        extra = _RUNNERS[command](cfg, out, written)
    except Exception as exc:
        manifest = io.build_manifest(
            command, cfg.to_dict(), cfg.seed, written,
            time.perf_counter() - t0, extra={"error": str(exc)},
            status="partial")
        io.write_manifest(out / f"{command}_manifest.json", manifest)
        raise
    manifest = io.build_manifest(command, cfg.to_dict(), cfg.seed, written,
                                 time.perf_counter() - t0, extra=extra)
    mpath = out / f"{command}_manifest.json"
    io.write_manifest(mpath, manifest)
    return mpath


def main(argv=None):
    args = _parse(argv)
    if args.threads:
        _set_threads(args.threads)
    try:
        cfg = SimConfig.from_file(args.config) if args.config \
            else SimConfig()
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.validate()
        if args.out is not None:
            cfg.out_dir = args.out
        run(cfg, args.command)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, FloatingPointError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
