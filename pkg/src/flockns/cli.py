"""Command-line interface: run | ensemble | sweep | verify | particles | report.

Exit codes: 0 success, 2 configuration rejected, 3 runtime breach (the breach
record is serialized into the output directory). All side effects stay under
the --out directory.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .config import ConfigError, load_config
from .constitutive import PositivityError
from .galerkin import MassOperatorError
from .diagnostics import renormalized_defect
from .particles import ParticleState, empirical_fields, particle_kernels, run_particles
from .sinks import (
    ensemble_records,
    make_record,
    metadata_record,
    report_records,
    sweep_records,
    trajectory_records,
    write_ndjson,
    write_summary_csv,
)
from .stepper import run_ensemble, run_path, run_sweep
from .torus import coeffs_to_field, lp_norm, Field

BREACH_ERRORS = (PositivityError, MassOperatorError, FloatingPointError)

__all__ = ["main"]


def _add_common(parser):
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        dest="overrides", help="override a field by dotted path")
    parser.add_argument("--seed", type=int, help="override the root seed")
    parser.add_argument("--out", help="output directory (default from config)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads; never changes results")


def _resolve_out(out: str) -> str:
    """Relative output paths land under $FLOCKNS_OUT_ROOT when it is set."""
    root = os.environ.get("FLOCKNS_OUT_ROOT")
    if root and not os.path.isabs(out):
        return os.path.join(root, out)
    return out


def _load(args):
    cfg = load_config(args.config, args.overrides)
    seed = args.seed if args.seed is not None else int(cfg.ensemble["root_seed"])
    out = _resolve_out(args.out or cfg.outputs["dir"])
    os.makedirs(out, exist_ok=True)
    return cfg, seed, out


def _write_breach(out: str, err: Exception) -> None:
    payload = {"error": type(err).__name__, "message": str(err)}
    if isinstance(err, PositivityError):
        payload["index"] = list(err.index)
        payload["value"] = err.value
        payload["context"] = err.context
    with open(os.path.join(out, "breach.json"), "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def _run_opts(cfg):
    reports = cfg.outputs["reports"]
    return {
        "snapshot_times": [float(t) for t in cfg.outputs["snapshot_times"]],
        "store_density_series": bool(cfg.outputs["store_density_series"])
        or "renormalized" in reports,
        "track_identity": bool(cfg.outputs["track_identity"])
        or "pressure_identity" in reports,
    }


def cmd_run(args) -> int:
    cfg, seed, out = _load(args)
    rho0, u0 = cfg.initial_data()
    try:
        traj = run_path(cfg.scheme, cfg.kernels, cfg.noise_model, rho0, u0,
                        seed=seed, source=cfg.source(), **_run_opts(cfg))
    except BREACH_ERRORS as err:
        _write_breach(out, err)
        print(f"runtime breach: {err}", file=sys.stderr)
        return 3
    write_ndjson(os.path.join(out, "metadata.json"), [metadata_record(cfg, seed)])
    write_ndjson(os.path.join(out, "trajectory.ndjson"),
                 trajectory_records(traj, cfg.config_hash))
    reports = list(report_records(traj, cfg.config_hash, cfg.outputs["reports"]))
    if "renormalized" in cfg.outputs["reports"]:
        for name in ("linear", "square", "rho_log_rho"):
            times, defects = renormalized_defect(traj, name)
            reports.append(make_record(
                "renormalized_defect",
                {"entropy": name, "times": times, "defects": defects},
                cfg.config_hash, seed,
            ))
    write_ndjson(os.path.join(out, "reports.ndjson"), reports)
    write_summary_csv(os.path.join(out, "summary.csv"), traj)
    from .plots import render_run

    for path in render_run(out):
        print(f"wrote {path}")
    print(f"run complete: {len(traj.times) - 1} steps, out dir {out}")
    return 0


def cmd_ensemble(args) -> int:
    cfg, seed, out = _load(args)
    rho0, u0 = cfg.initial_data()
    try:
        stats = run_ensemble(
            cfg.scheme, cfg.kernels, cfg.noise_model, rho0, u0,
            n_paths=int(cfg.ensemble["paths"]), root_seed=seed,
            threads=args.threads, r_moments=tuple(cfg.ensemble["r_moments"]),
        )
    except BREACH_ERRORS as err:
        _write_breach(out, err)
        print(f"runtime breach: {err}", file=sys.stderr)
        return 3
    write_ndjson(os.path.join(out, "metadata.json"),
                 [metadata_record(cfg, seed, {"n_paths": stats.n_paths})])
    write_ndjson(os.path.join(out, "ensemble.ndjson"),
                 ensemble_records(stats, cfg.config_hash))
    from .plots import render_ensemble

    for path in render_ensemble(out):
        print(f"wrote {path}")
    mean = float(np.mean(stats.residuals))
    se = float(np.std(stats.residuals, ddof=1) / math.sqrt(stats.n_paths)) \
        if stats.n_paths > 1 else 0.0
    print(f"ensemble of {stats.n_paths} paths: mean energy residual {mean:+.3e} (SE {se:.3e})")
    return 0


def cmd_sweep(args) -> int:
    if args.axis:
        args.overrides.append(f"sweep.axis={args.axis}")
    if args.values:
        args.overrides.append(f"sweep.values=[{args.values}]")
    cfg, seed, out = _load(args)
    rho0, u0 = cfg.initial_data()
    try:
        report = run_sweep(
            cfg.scheme, cfg.sweep["axis"], cfg.sweep["values"],
            cfg.kernels, cfg.noise_model, rho0, u0, seed=seed,
        )
    except BREACH_ERRORS as err:
        _write_breach(out, err)
        print(f"runtime breach: {err}", file=sys.stderr)
        return 3
    write_ndjson(os.path.join(out, "metadata.json"), [metadata_record(cfg, seed)])
    write_ndjson(os.path.join(out, "sweep.ndjson"),
                 sweep_records(report, cfg.config_hash, seed))
    from .plots import render_sweep

    for path in render_sweep(out):
        print(f"wrote {path}")
    gaps = ", ".join(f"{g:.3e}" for g in report.rho_gaps)
    print(f"sweep along {report.axis} at {report.values}: density gaps [{gaps}]")
    return 0


def cmd_verify(args) -> int:
    from .verify import run_all

    cfg, seed, out = _load(args)
    results = run_all()
    payload = [
        {"name": r.name, "passed": r.passed, "detail": r.detail} for r in results
    ]
    write_ndjson(os.path.join(out, "verify.json"),
                 [make_record("verify", {"checks": payload,
                                         "all_passed": all(r.passed for r in results)},
                              cfg.config_hash, seed)])
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:44s} {r.detail}")
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} checks passed")
    return 0 if n_ok == len(results) else 1


def _sample_positions(rho0, grid, count, rng):
    """Rejection-sample particle positions from the initial density."""
    top = float(rho0.data.max())
    out = np.empty((count, grid.d))
    filled = 0
    while filled < count:
        cand = rng.uniform(-1, 1, (4 * count, grid.d))
        idx = tuple(((cand + 1.0) / 2.0 * grid.n).astype(int).T % grid.n)
        keep = rng.uniform(0, top, 4 * count) < rho0.data[idx]
        take = cand[keep][: count - filled]
        out[filled:filled + take.shape[0]] = take
        filled += take.shape[0]
    return out


def cmd_particles(args) -> int:
    cfg, seed, out = _load(args)
    pcfg = cfg.particles
    grid = cfg.grid
    rng = np.random.default_rng(int(pcfg["seed"]) + seed)
    rho0, u0_coeffs = cfg.initial_data()
    N = int(pcfg["count"])
    positions = _sample_positions(rho0, grid, N, rng)
    u0_field = coeffs_to_field(grid, u0_coeffs)
    idx = tuple(((positions + 1.0) / 2.0 * grid.n).astype(int).T % grid.n)
    velocities = np.stack([u0_field.data[a][idx] for a in range(grid.d)], axis=1)
    ps = ParticleState(positions, velocities)

    name = cfg.doc["kernels"]["preset"]
    if cfg.doc["kernels"].get("K_file"):
        print("particle reference supports preset kernels only", file=sys.stderr)
        return 2
    psi, gradK = particle_kernels(name, cfg.doc["kernels"]["K_scale"],
                                  cfg.doc["kernels"]["psi_scale"])
    h, T = float(pcfg["h"]), float(pcfg["T"])
    n_steps = int(round(T / h))
    try:
        states, variance, momentum = run_particles(ps, h, n_steps, psi, gradK,
                                                   cell_size=2.0 / grid.n)
    except BREACH_ERRORS as err:
        _write_breach(out, err)
        print(f"runtime breach: {err}", file=sys.stderr)
        return 3

    records = [metadata_record(cfg, seed, {"particle_count": N})]
    for i, state in enumerate(states):
        records.append(make_record(
            "particle_step",
            {"t": state.time, "velocity_variance": float(variance[i]),
             "momentum": momentum[i]},
            cfg.config_hash, seed,
        ))

    # qualitative comparison against the continuum run at matched times
    mass0 = float(np.sum(rho0.data) * grid.cell_volume)
    scheme = cfg.scheme
    compare_times = sorted({0.0, round(scheme.T / 2.0, 12), scheme.T})
    try:
        traj = run_path(scheme, cfg.kernels, cfg.noise_model, rho0, u0_coeffs,
                        seed=seed, snapshot_times=compare_times)
    except BREACH_ERRORS as err:
        _write_breach(out, err)
        print(f"runtime breach: {err}", file=sys.stderr)
        return 3
    bw = float(pcfg["bandwidth_cells"]) * 2.0 / grid.n
    for t in compare_times:
        key = round(t, 12)
        if key not in traj.snapshots:
            continue
        j = int(round(t / h))
        if not 0 <= j < len(states):
            continue
        emp_rho, emp_mom = empirical_fields(states[j], grid, bw, particle_mass=mass0 / N)
        rho_t, u_t = traj.snapshots[key]
        cont_rho = Field(grid, rho_t)
        cont_mom = Field(grid, rho_t[np.newaxis] * coeffs_to_field(grid, u_t).data)
        rel_rho = lp_norm(Field(grid, emp_rho.data - cont_rho.data), 2) / lp_norm(cont_rho, 2)
        mom_scale = max(lp_norm(cont_mom, 2), 1e-12)
        rel_mom = lp_norm(Field(grid, emp_mom.data - cont_mom.data), 2) / mom_scale
        records.append(make_record(
            "particle_comparison",
            {"t": t, "rho_rel_l2": rel_rho, "momentum_rel_l2": rel_mom},
            cfg.config_hash, seed,
        ))
    write_ndjson(os.path.join(out, "particles.ndjson"), records)
    from .plots import render_particles

    for path in render_particles(out):
        print(f"wrote {path}")
    print(f"particle run: {N} agents, {n_steps} steps")
    return 0


def cmd_report(args) -> int:
    out = _resolve_out(args.out or "out")
    from . import plots

    written = []
    if os.path.exists(os.path.join(out, "trajectory.ndjson")):
        written += plots.render_run(out)
    if os.path.exists(os.path.join(out, "ensemble.ndjson")):
        written += plots.render_ensemble(out)
    if os.path.exists(os.path.join(out, "sweep.ndjson")):
        written += plots.render_sweep(out)
    if os.path.exists(os.path.join(out, "particles.ndjson")):
        written += plots.render_particles(out)
    if not written:
        print(f"no NDJSON records found under {out}", file=sys.stderr)
        return 2
    for path in written:
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="flockns",
        description="Pseudo-spectral solver and verification harness for "
                    "stochastic compressible flocking hydrodynamics",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {}
    for name, handler, descr in (
        ("run", cmd_run, "integrate one path and write all enabled reports"),
        ("ensemble", cmd_ensemble, "path ensemble: moments and energy statistics"),
        ("sweep", cmd_sweep, "common-noise refinement sweep along one axis"),
        ("verify", cmd_verify, "run the named invariant battery"),
        ("particles", cmd_particles, "interacting-particle reference run"),
        ("report", cmd_report, "re-render figures from stored NDJSON"),
    ):
        p = sub.add_parser(name, help=descr)
        if name == "report":
            p.add_argument("--out", help="directory holding the stored records")
        else:
            _add_common(p)
        if name == "sweep":
            p.add_argument("--axis", choices=("h", "m", "eps", "delta"),
                           help="sweep axis (shorthand for --set sweep.axis=...)")
            p.add_argument("--values", help="comma-separated sweep values")
        handlers[name] = handler

    args = parser.parse_args(argv)
    try:
        return handlers[args.command](args)
    except ConfigError as err:
        print(f"configuration rejected: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
