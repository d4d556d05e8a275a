"""Output sinks: NDJSON records, CSV summaries, and the run-metadata record.

Every record carries the schema version, the canonical config hash, the root
seed, and the build identifier. Floats are serialized with Python's
round-trip repr and NaN/Inf are rejected, so identical runs produce
byte-identical files regardless of worker count.
"""

from __future__ import annotations

import csv
import json
import os
import subprocess
from functools import lru_cache

import numpy as np

SCHEMA_VERSION = "flockns.v1"

__all__ = [
    "SCHEMA_VERSION",
    "build_id",
    "write_ndjson",
    "read_ndjson",
    "trajectory_records",
    "report_records",
    "metadata_record",
    "write_summary_csv",
    "ensemble_records",
    "sweep_records",
]


@lru_cache(maxsize=1)
def build_id() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _jsonable(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def make_record(kind: str, payload: dict, config_hash: str, seed) -> dict:
    rec = {
        "schema": SCHEMA_VERSION,
        "kind": kind,
        "config_hash": config_hash,
        "seed": seed,
        "build": build_id(),
    }
    rec.update(_jsonable(payload))
    return rec


def write_ndjson(path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, allow_nan=False))
            fh.write("\n")


def read_ndjson(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def trajectory_records(traj, config_hash: str):
    """Per-step state records plus full-field snapshot records."""
    seed = traj.seed
    for i, t in enumerate(traj.times):
        yield make_record(
            "step",
            {
                "t": t,
                "mass": traj.mass[i],
                "min_rho": traj.min_rho[i],
                "u_norm": traj.u_norm[i],
                "cutoff_factor": traj.cutoff_factor[i],
                "post_tau_R": bool(traj.post_tau[i]),
                "kinetic": traj.kinetic[i],
                "potential": traj.potential[i],
                "interaction": traj.interaction[i],
                "rho_log_rho": traj.rho_log_rho[i],
                "acc_stress": traj.acc_stress[i],
                "acc_visc": traj.acc_visc[i],
                "acc_density": traj.acc_density[i],
                "acc_align": traj.acc_align[i],
                "acc_ito": traj.acc_ito[i],
                "acc_work": traj.acc_work[i],
                "acc_rem_gradk": traj.acc_rem_gradk[i],
                "acc_rem_cutoff": traj.acc_rem_cutoff[i],
            },
            config_hash, seed,
        )
    for t, (rho_data, u_coeffs) in sorted(traj.snapshots.items()):
        yield make_record(
            "snapshot",
            {
                "t": t,
                "rho": rho_data.ravel(),
                "u_coeffs": u_coeffs,
                "grid": {"d": traj.grid.d, "n": traj.grid.n},
            },
            config_hash, seed,
        )


def report_records(traj, config_hash: str, reports=("mass", "energy")):
    """Diagnostic report records for one trajectory."""
    from .diagnostics import energy_report, mass_residual

    seed = traj.seed
    if "mass" in reports:
        yield make_record(
            "mass_residual",
            {"value": mass_residual(traj), "mass0": traj.mass0},
            config_hash, seed,
        )
    if "energy" in reports:
        for t in sorted(traj.snapshots):
            rep = energy_report(traj, t)
            yield make_record(
                "energy_report",
                {
                    "t": rep.time,
                    "kinetic": rep.kinetic,
                    "potential": rep.potential,
                    "interaction": rep.interaction,
                    "stress_dissip": rep.stress_dissip,
                    "visc_dissip": rep.visc_dissip,
                    "density_dissip": rep.density_dissip,
                    "alignment_dissip": rep.alignment_dissip,
                    "ito_correction": rep.ito_correction,
                    "stochastic_work": rep.stochastic_work,
                    "remainder_grad_k": rep.remainder_grad_k,
                    "remainder_cutoff": rep.remainder_cutoff,
                    "residual": rep.residual,
                },
                config_hash, seed,
            )
    if traj.identity is not None:
        yield make_record(
            "pressure_identity",
            {
                "lhs": traj.identity.lhs,
                "terms": traj.identity.terms,
                "defect": traj.identity.defect,
            },
            config_hash, seed,
        )
    if traj.tau_R is not None:
        yield make_record("tau_R", {"t": traj.tau_R}, config_hash, seed)


def metadata_record(run_config, seed, extra=None) -> dict:
    nm = run_config.noise_model
    payload = {
        "config": run_config.doc,
        "noise_tail_mass": nm.tail_mass if nm is not None else 0.0,
        "noise_sum_g_sq": nm.sum_g_sq if nm is not None else 0.0,
        "n_steps": run_config.scheme.n_steps,
        "h_last": run_config.scheme.h_last,
        "mode_capacity": (run_config.grid.n - 1) ** run_config.grid.d,
    }
    if extra:
        payload.update(extra)
    return make_record("metadata", payload, run_config.config_hash, seed)


def write_summary_csv(path, traj) -> None:
    """Per-step time series as one delimited table."""
    cols = [
        ("t", traj.times), ("mass", traj.mass), ("min_rho", traj.min_rho),
        ("u_norm", traj.u_norm), ("cutoff_factor", traj.cutoff_factor),
        ("kinetic", traj.kinetic), ("potential", traj.potential),
        ("interaction", traj.interaction), ("acc_stress", traj.acc_stress),
        ("acc_visc", traj.acc_visc), ("acc_density", traj.acc_density),
        ("acc_align", traj.acc_align), ("acc_ito", traj.acc_ito),
        ("acc_work", traj.acc_work), ("rho_log_rho", traj.rho_log_rho),
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([name for name, _ in cols])
        for i in range(len(traj.times)):
            writer.writerow([repr(float(series[i])) for _, series in cols])


def ensemble_records(stats, config_hash: str):
    for i, t in enumerate(stats.times):
        payload = {
            "t": float(t),
            "mass_mean": stats.mass_mean[i],
            "mass_var": stats.mass_var[i],
            "energy_mean": stats.energy_mean[i],
            "energy_var": stats.energy_var[i],
            "u_norm_mean": stats.u_norm_mean[i],
            "u_norm_var": stats.u_norm_var[i],
        }
        for name, by_r in stats.raw_moments.items():
            for r, series in by_r.items():
                payload[f"{name}_moment_r{r}"] = series[i]
        yield make_record("ensemble_moments", payload, config_hash, stats.root_seed)
    res = stats.residuals
    n = len(res)
    yield make_record(
        "ensemble_energy_residual",
        {
            "n_paths": n,
            "mean": float(np.mean(res)),
            "stderr": float(np.std(res, ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
            "min": float(np.min(res)),
            "max": float(np.max(res)),
        },
        config_hash, stats.root_seed,
    )


def sweep_records(report, config_hash: str, seed):
    yield make_record(
        "sweep_gaps",
        {
            "axis": report.axis,
            "values": report.values,
            "rho_gaps": report.rho_gaps,
            "momentum_gaps": report.momentum_gaps,
            "evf_gaps": report.evf.gaps,
            "evf_decreasing": bool(report.evf.decreasing),
            "energy_lhs_max": report.energy_lhs_max,
        },
        config_hash, seed,
    )
    for value, traj in zip(report.values, report.trajectories):
        yield make_record(
            "sweep_member",
            {
                "value": value,
                "times": list(traj.times),
                "rho_log_rho": list(traj.rho_log_rho),
                "mass_residual": float(np.abs(np.asarray(traj.mass) - traj.mass0).max()),
            },
            config_hash, seed,
        )
