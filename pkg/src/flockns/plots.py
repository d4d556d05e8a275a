"""Figure rendering from stored NDJSON records (no recomputation).

The report path re-reads the delimited output of a finished run and renders
matplotlib figures next to it; rendering twice over the same records is
byte-stable.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .sinks import read_ndjson

__all__ = ["render_run", "render_ensemble", "render_sweep", "render_particles"]

_SAVE_KW = {"dpi": 110, "metadata": {"Software": "flockns"}}


def _save(fig, path):
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def _steps(records):
    rows = [r for r in records if r["kind"] == "step"]
    return sorted(rows, key=lambda r: r["t"])


def render_run(out_dir: str) -> list:
    """Figures for a single-path run directory."""
    records = read_ndjson(os.path.join(out_dir, "trajectory.ndjson"))
    steps = _steps(records)
    snaps = sorted((r for r in records if r["kind"] == "snapshot"), key=lambda r: r["t"])
    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    written = []
    t = np.array([r["t"] for r in steps])

    fig, ax = plt.subplots(figsize=(6, 4))
    mass0 = steps[0]["mass"]
    drift = np.abs(np.array([r["mass"] for r in steps]) - mass0)
    ax.semilogy(t, np.maximum(drift, 1e-18))
    ax.set_xlabel("t")
    ax.set_ylabel("|mass(t) - mass(0)|")
    ax.set_title("mass drift")
    written.append(_save(fig, os.path.join(fig_dir, "mass_drift.png")))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for key in ("kinetic", "potential", "interaction"):
        ax.plot(t, [r[key] for r in steps], label=key)
    for key in ("acc_stress", "acc_visc", "acc_density", "acc_align"):
        ax.plot(t, [r[key] for r in steps], "--", label=key)
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.set_title("energy terms and dissipation ledgers")
    written.append(_save(fig, os.path.join(fig_dir, "energy_terms.png")))

    fig, ax = plt.subplots(figsize=(6, 4))
    lhs = (
        np.array([r["kinetic"] + r["potential"] + r["interaction"] for r in steps])
        - (steps[0]["kinetic"] + steps[0]["potential"] + steps[0]["interaction"])
        + np.array([r["acc_stress"] + r["acc_visc"] + r["acc_density"] + r["acc_align"]
                    for r in steps])
    )
    rhs = np.array([
        r["acc_work"] + r["acc_ito"] + r["acc_rem_gradk"] + r["acc_rem_cutoff"]
        for r in steps
    ])
    ax.plot(t, lhs - rhs)
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("t")
    ax.set_ylabel("LHS - RHS")
    ax.set_title("energy balance residual")
    written.append(_save(fig, os.path.join(fig_dir, "energy_residual.png")))

    if snaps:
        d = snaps[0]["grid"]["d"]
        n = snaps[0]["grid"]["n"]
        if d == 1:
            fig, ax = plt.subplots(figsize=(6, 4))
            x = -1.0 + 2.0 * np.arange(n) / n
            for r in snaps:
                ax.plot(x, r["rho"], label=f"t={r['t']:.3f}")
            ax.set_xlabel("x")
            ax.set_ylabel("density")
            ax.legend(fontsize=8)
        else:
            fig, axes = plt.subplots(1, len(snaps), figsize=(3.2 * len(snaps), 3),
                                     squeeze=False)
            for ax, r in zip(axes[0], snaps):
                img = np.array(r["rho"]).reshape((n,) * d)
                if d == 3:
                    img = img[:, :, n // 2]
                pc = ax.imshow(img, origin="lower", extent=(-1, 1, -1, 1))
                ax.set_title(f"t={r['t']:.3f}", fontsize=8)
                fig.colorbar(pc, ax=ax, shrink=0.8)
        fig.suptitle("density snapshots")
        written.append(_save(fig, os.path.join(fig_dir, "snapshots.png")))
    return written


def render_ensemble(out_dir: str) -> list:
    records = read_ndjson(os.path.join(out_dir, "ensemble.ndjson"))
    moments = sorted((r for r in records if r["kind"] == "ensemble_moments"),
                     key=lambda r: r["t"])
    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    t = np.array([r["t"] for r in moments])
    mean = np.array([r["energy_mean"] for r in moments])
    sd = np.sqrt(np.maximum([r["energy_var"] for r in moments], 0.0))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t, mean, label="mean energy")
    ax.fill_between(t, mean - sd, mean + sd, alpha=0.25, label="+/- sd")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.set_title("ensemble energy moments")
    return [_save(fig, os.path.join(fig_dir, "ensemble_energy.png"))]


def render_sweep(out_dir: str) -> list:
    records = read_ndjson(os.path.join(out_dir, "sweep.ndjson"))
    gaps = next(r for r in records if r["kind"] == "sweep_gaps")
    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    values = np.array(gaps["values"], dtype=float)
    pair_x = values[:-1]
    fig, ax = plt.subplots(figsize=(6, 4))
    for key in ("rho_gaps", "momentum_gaps", "evf_gaps"):
        ys = np.maximum(np.array(gaps[key], dtype=float), 1e-18)
        ax.loglog(pair_x, ys, "o-", label=key)
    ax.set_xlabel(f"coarse {gaps['axis']} of each pair")
    ax.set_ylabel("successive gap")
    ax.legend(fontsize=8)
    ax.set_title(f"common-noise refinement along {gaps['axis']}")
    return [_save(fig, os.path.join(fig_dir, "sweep_gaps.png"))]


def render_particles(out_dir: str) -> list:
    records = read_ndjson(os.path.join(out_dir, "particles.ndjson"))
    rows = sorted((r for r in records if r["kind"] == "particle_step"),
                  key=lambda r: r["t"])
    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    t = [r["t"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t, [r["velocity_variance"] for r in rows], label="velocity variance")
    comp = [r for r in records if r["kind"] == "particle_comparison"]
    if comp:
        comp.sort(key=lambda r: r["t"])
        ax.plot([r["t"] for r in comp], [r["rho_rel_l2"] for r in comp],
                "s--", label="rel L2 density gap vs continuum")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.set_title("particle reference diagnostics")
    return [_save(fig, os.path.join(fig_dir, "particles.png"))]
