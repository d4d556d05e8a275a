"""Interacting-particle reference: alignment plus pairwise attraction-repulsion.

The agent system whose mean-field hydrodynamics the solver integrates:

    dx_i/dt = v_i
    dv_i/dt = (1/N) sum_j psi(x_i - x_j) (v_j - v_i) - (1/N) sum_j grad K(x_i - x_j)

on the same torus, integrated with the explicit midpoint rule. Pairwise
forces are antisymmetric for symmetric kernels, so total momentum is
conserved; with psi >= 0 and K = 0 the velocity variance is non-increasing.
Kernel-density readback onto a grid supports qualitative comparison with the
continuum fields.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .torus import Field, TorusGrid

__all__ = [
    "ParticleState",
    "particle_kernels",
    "particle_step",
    "run_particles",
    "empirical_fields",
    "velocity_variance",
    "total_momentum",
]


def wrap_positions(x: np.ndarray) -> np.ndarray:
    """Fold coordinates into [-1, 1)."""
    return (x + 1.0) % 2.0 - 1.0


@dataclass
class ParticleState:
    positions: np.ndarray   # (N, d) in [-1, 1)
    velocities: np.ndarray  # (N, d)
    time: float = 0.0

    def __post_init__(self):
        self.positions = wrap_positions(np.asarray(self.positions, dtype=float))
        self.velocities = np.asarray(self.velocities, dtype=float)
        if self.positions.shape != self.velocities.shape or self.positions.ndim != 2:
            raise ValueError("positions and velocities must both be (N, d)")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.velocities))):
            raise FloatingPointError("non-finite particle state")

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]


def particle_kernels(name: str, K_scale: float = 1.0, psi_scale: float = 1.0):
    """(psi, gradK) callables on displacement arrays for the named preset."""
    if name == "cosine":
        def psi(disp):
            out = np.ones(disp.shape[:-1])
            for a in range(disp.shape[-1]):
                out = out * (1.0 + np.cos(math.pi * disp[..., a])) / 2.0
            return psi_scale * out

        def gradK(disp):
            return -K_scale * math.pi * np.sin(math.pi * disp)

        return psi, gradK
    if name == "zero":
        return (lambda disp: np.zeros(disp.shape[:-1]),
                lambda disp: np.zeros_like(disp))
    raise ValueError(f"unknown particle kernel preset {name!r}")


def _wrap_disp(diff: np.ndarray) -> np.ndarray:
    """Displacement folded to the nearest periodic representative in [-1, 1)."""
    return (diff + 1.0) % 2.0 - 1.0


def _acceleration(x: np.ndarray, v: np.ndarray, psi, gradK) -> np.ndarray:
    N = x.shape[0]
    disp = _wrap_disp(x[:, None, :] - x[None, :, :])       # (N, N, d)
    A = psi(disp)
    A = 0.5 * (A + A.T)  # symmetric kernel, enforce against rounding
    align = (A @ v - A.sum(axis=1)[:, None] * v) / N
    attract = -gradK(disp).sum(axis=1) / N
    return align + attract


def particle_step(ps: ParticleState, h: float, psi, gradK,
                  cell_size: float | None = None) -> ParticleState:
    """One explicit-midpoint step of the particle system."""
    if h <= 0:
        raise ValueError("step size must be positive")
    vmax = float(np.sqrt(np.sum(ps.velocities**2, axis=1)).max()) if ps.count else 0.0
    if cell_size is not None and h * vmax > cell_size / 2.0:
        warnings.warn(
            f"particles move {h * vmax:.3e} per step, over half a cell "
            f"({cell_size / 2.0:.3e})", stacklevel=2,
        )
    x0, v0 = ps.positions, ps.velocities
    a0 = _acceleration(x0, v0, psi, gradK)
    x_mid = x0 + 0.5 * h * v0
    v_mid = v0 + 0.5 * h * a0
    a_mid = _acceleration(wrap_positions(x_mid), v_mid, psi, gradK)
    return ParticleState(
        positions=wrap_positions(x0 + h * v_mid),
        velocities=v0 + h * a_mid,
        time=ps.time + h,
    )


def run_particles(ps: ParticleState, h: float, n_steps: int, psi, gradK,
                  cell_size: float | None = None):
    """Integrate and record per-step variance and momentum diagnostics."""
    states = [ps]
    variance = [velocity_variance(ps)]
    momentum = [total_momentum(ps)]
    for _ in range(n_steps):
        ps = particle_step(ps, h, psi, gradK, cell_size=cell_size)
        states.append(ps)
        variance.append(velocity_variance(ps))
        momentum.append(total_momentum(ps))
    return states, np.asarray(variance), np.asarray(momentum)


def velocity_variance(ps: ParticleState) -> float:
    """(1/N) sum |v_i - mean v|^2."""
    vbar = ps.velocities.mean(axis=0)
    return float(np.mean(np.sum((ps.velocities - vbar) ** 2, axis=1)))


def total_momentum(ps: ParticleState) -> np.ndarray:
    return ps.velocities.sum(axis=0)


def empirical_fields(ps: ParticleState, grid: TorusGrid, bandwidth: float,
                     particle_mass: float = 1.0):
    """Periodic Gaussian kernel-density estimates of (rho, momentum).

    Each particle deposits a wrapped Gaussian normalized on the torus, so
    integral rho = N * particle_mass exactly. Bandwidth must cover at least
    two grid cells.
    """
    cell = 2.0 / grid.n
    if bandwidth < 2 * cell:
        raise ValueError(f"bandwidth {bandwidth} under two cells ({2 * cell})")
    if ps.d != grid.d:
        raise ValueError("particle dimension differs from grid dimension")
    x_axis = grid.axis_coords()
    rho = np.zeros(grid.shape)
    mom = np.zeros((grid.d,) + grid.shape)
    images = np.arange(-2, 3) * 2.0
    for i in range(ps.count):
        axis_profiles = []
        for a in range(grid.d):
            dxs = x_axis - ps.positions[i, a]
            prof = np.zeros(grid.n)
            for img in images:
                prof += np.exp(-((dxs + img) ** 2) / (2.0 * bandwidth**2))
            axis_profiles.append(prof)
        w = axis_profiles[0]
        for prof in axis_profiles[1:]:
            w = np.multiply.outer(w, prof)
        w = w / (w.sum() * grid.cell_volume)  # torus-normalized per particle
        rho += particle_mass * w
        for a in range(grid.d):
            mom[a] += particle_mass * ps.velocities[i, a] * w
    return Field(grid, rho), Field(grid, mom)
