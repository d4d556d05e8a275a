"""Pressure laws, viscous stress, the smooth cutoff, and interaction kernels.

The default pressure family is the power law p = a*rho^gamma (gamma > 3/2)
with regularization p_delta = p + delta*(rho^Gamma + rho^2), Gamma fixed at
max(gamma, 6). Its potential P (rho * integral_1^rho p(s)/s^2 ds) has the
closed form implemented here; P''_delta = p'_delta / rho >= 2*delta.

Density samples below -1e-12 abort with a positivity breach naming the grid
index; values in [-1e-12, 0) are clamped to zero before evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .torus import Field, TorusGrid, lp_norm, reflect, to_spectral, xm_norm, _dealias_mask

__all__ = [
    "PositivityError",
    "PressureLaw",
    "ViscosityParams",
    "KernelPair",
    "KernelReport",
    "clamp_density",
    "pressure",
    "pressure_delta",
    "pressure_prime_delta",
    "potential",
    "potential_delta",
    "potential_second_delta",
    "stress",
    "stress_dissipation",
    "cutoff_chi",
    "velocity_truncate",
    "validate_kernels",
    "kernel_preset",
    "KERNEL_PRESETS",
]

NEGATIVE_DENSITY_TOL = 1e-12


class PositivityError(RuntimeError):
    """A density sample dropped below the admissible tolerance."""

    def __init__(self, index, value, context=""):
        self.index = index
        self.value = value
        self.context = context
        where = f" during {context}" if context else ""
        super().__init__(f"density sample {value:.3e} < -{NEGATIVE_DENSITY_TOL:.0e} at grid index {index}{where}")


def clamp_density(data: np.ndarray, context: str = "") -> np.ndarray:
    """Clamp round-off negatives to zero; abort on genuine negativity."""
    low = data.min()
    if low >= 0.0:
        return data
    if low < -NEGATIVE_DENSITY_TOL:
        flat = int(np.argmin(data))
        index = tuple(int(i) for i in np.unravel_index(flat, data.shape))
        raise PositivityError(index, float(low), context)
    return np.maximum(data, 0.0)


@dataclass(frozen=True)
class PressureLaw:
    """Power-law pressure a*rho^gamma plus the delta-regularization."""

    a: float
    gamma: float
    delta: float = 0.0

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError(f"pressure amplitude must be positive, got a={self.a}")
        if self.gamma <= 1.5:
            raise ValueError(f"adiabatic exponent must exceed 3/2, got gamma={self.gamma}")
        if self.delta < 0:
            raise ValueError(f"regularization weight must be >= 0, got delta={self.delta}")

    @property
    def Gamma(self) -> float:
        return max(self.gamma, 6.0)


@dataclass(frozen=True)
class ViscosityParams:
    mu: float
    lam: float

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"shear viscosity must be positive, got mu={self.mu}")
        if self.lam - 2.0 * self.mu / 3.0 < 0:
            raise ValueError(f"need lambda - (2/3)mu >= 0, got lambda={self.lam}, mu={self.mu}")


def _rho(rho: Field, context: str) -> np.ndarray:
    return clamp_density(rho.data, context)


def pressure(rho: Field, law: PressureLaw) -> Field:
    r = _rho(rho, "pressure")
    return Field(rho.grid, law.a * r**law.gamma)


def pressure_delta(rho: Field, law: PressureLaw) -> Field:
    r = _rho(rho, "pressure_delta")
    out = law.a * r**law.gamma
    if law.delta > 0:
        out = out + law.delta * (r**law.Gamma + r**2)
    return Field(rho.grid, out)


def pressure_prime_delta(rho: Field, law: PressureLaw) -> Field:
    r = _rho(rho, "pressure_prime_delta")
    out = law.a * law.gamma * r ** (law.gamma - 1.0)
    if law.delta > 0:
        out = out + law.delta * (law.Gamma * r ** (law.Gamma - 1.0) + 2.0 * r)
    return Field(rho.grid, out)


def potential(rho: Field, law: PressureLaw) -> Field:
    """P(rho) = a*(rho^gamma - rho)/(gamma - 1), the P(0)=0 extension."""
    r = _rho(rho, "potential")
    return Field(rho.grid, law.a * (r**law.gamma - r) / (law.gamma - 1.0))


def potential_delta(rho: Field, law: PressureLaw) -> Field:
    r = _rho(rho, "potential_delta")
    out = law.a * (r**law.gamma - r) / (law.gamma - 1.0)
    if law.delta > 0:
        out = out + law.delta * ((r**law.Gamma - r) / (law.Gamma - 1.0) + r**2 - r)
    return Field(rho.grid, out)


def potential_second_delta(rho: Field, law: PressureLaw) -> Field:
    """P''_delta = p'_delta/rho = a*g*rho^(g-2) + delta*(G*rho^(G-2) + 2)."""
    r = _rho(rho, "potential_second_delta")
    out = law.a * law.gamma * r ** (law.gamma - 2.0)
    if law.delta > 0:
        out = out + law.delta * (law.Gamma * r ** (law.Gamma - 2.0) + 2.0)
    return Field(rho.grid, out)


def stress(Du: Field, visc: ViscosityParams) -> Field:
    """S(Du) = mu*Du + (lambda + mu) * tr(Du) * I, pointwise on the tensor."""
    grid = Du.grid
    d = grid.d
    if Du.data.shape[:2] != (d, d):
        raise ValueError("stress expects a (d, d) tensor field")
    tr = np.trace(Du.data, axis1=0, axis2=1)
    out = visc.mu * Du.data.copy()
    for i in range(d):
        out[i, i] += (visc.lam + visc.mu) * tr
    return Field(grid, out)


def stress_dissipation(Du: Field, visc: ViscosityParams) -> Field:
    """S(Du):Du = mu*|Du|^2 + (lambda + mu)*(tr Du)^2 >= 0 pointwise."""
    grid = Du.grid
    tr = np.trace(Du.data, axis1=0, axis2=1)
    frob = np.sum(Du.data**2, axis=(0, 1))
    return Field(grid, visc.mu * frob + (visc.lam + visc.mu) * tr**2)


def _sigma(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    pos = t > 0
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        out[pos] = np.exp(-1.0 / t[pos])
    return out


def cutoff_chi(z):
    """Smooth non-increasing cutoff: exactly 1 on z<=0, exactly 0 on z>=1."""
    arr = np.asarray(z, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    s_lo = _sigma(1.0 - arr)
    s_hi = _sigma(arr)
    out = s_lo / (s_lo + s_hi)
    out[arr <= 0.0] = 1.0
    out[arr >= 1.0] = 0.0
    return float(out[0]) if scalar else out.reshape(np.shape(z))


def velocity_truncate(u_coeffs: np.ndarray, R: float) -> np.ndarray:
    """[v]_R = chi(||v||_Xm - R) v; never increases the coefficient norm."""
    if R <= 0:
        raise ValueError(f"cutoff level must be positive, got R={R}")
    factor = cutoff_chi(xm_norm(u_coeffs) - R)
    return np.asarray(u_coeffs) * factor


@dataclass(frozen=True)
class KernelPair:
    """Attraction-repulsion kernel K and alignment kernel psi on one grid."""

    K: Field
    psi: Field

    def __post_init__(self):
        if self.K.grid != self.psi.grid:
            raise ValueError("K and psi must share a grid")
        if not (self.K.is_scalar and self.psi.is_scalar):
            raise ValueError("kernels must be scalar fields")

    @property
    def grid(self) -> TorusGrid:
        return self.K.grid


@dataclass(frozen=True)
class KernelReport:
    K_symmetric: bool
    psi_symmetric: bool
    psi_nonnegative: bool
    K_smooth: bool
    psi_smooth: bool
    K_symmetry_error: float
    psi_symmetry_error: float
    psi_min: float
    K_tail_fraction: float
    psi_tail_fraction: float

    @property
    def passed(self) -> bool:
        return (
            self.K_symmetric
            and self.psi_symmetric
            and self.psi_nonnegative
            and self.K_smooth
            and self.psi_smooth
        )


def _tail_fraction(f: Field) -> float:
    """Relative spectral energy beyond 2/3 of the Nyquist band."""
    coef = to_spectral(f).coef
    total = float(np.sum(np.abs(coef) ** 2))
    if total == 0.0:
        return 0.0
    inside = float(np.sum(np.abs(coef[_dealias_mask(f.grid)]) ** 2))
    return max(0.0, 1.0 - inside / total)


def validate_kernels(kp: KernelPair, sym_tol: float = 1e-12, tail_tol: float = 1e-6) -> KernelReport:
    """Check the standing kernel assumptions; report-only, never raises."""
    scale_K = max(lp_norm(kp.K, np.inf), 1.0)
    scale_psi = max(lp_norm(kp.psi, np.inf), 1.0)
    K_sym_err = float(np.abs(reflect(kp.K).data - kp.K.data).max()) / scale_K
    psi_sym_err = float(np.abs(reflect(kp.psi).data - kp.psi.data).max()) / scale_psi
    psi_min = float(kp.psi.data.min())
    K_tail = _tail_fraction(kp.K)
    psi_tail = _tail_fraction(kp.psi)
    return KernelReport(
        K_symmetric=K_sym_err <= sym_tol,
        psi_symmetric=psi_sym_err <= sym_tol,
        psi_nonnegative=psi_min >= -NEGATIVE_DENSITY_TOL,
        K_smooth=K_tail <= tail_tol,
        psi_smooth=psi_tail <= tail_tol,
        K_symmetry_error=K_sym_err,
        psi_symmetry_error=psi_sym_err,
        psi_min=psi_min,
        K_tail_fraction=K_tail,
        psi_tail_fraction=psi_tail,
    )


def _cosine_K(grid: TorusGrid) -> np.ndarray:
    out = np.zeros(grid.shape)
    for x in grid.coords():
        out += np.cos(math.pi * x)
    return out


def _cosine_psi(grid: TorusGrid) -> np.ndarray:
    out = np.ones(grid.shape)
    for x in grid.coords():
        out *= (1.0 + np.cos(math.pi * x)) / 2.0
    return out


KERNEL_PRESETS = ("cosine", "zero")


def kernel_preset(grid: TorusGrid, name: str, K_scale: float = 1.0, psi_scale: float = 1.0) -> KernelPair:
    """Build a named kernel pair; low-mode presets are exact on coarse grids."""
    if name == "cosine":
        K = Field(grid, K_scale * _cosine_K(grid))
        psi = Field(grid, psi_scale * _cosine_psi(grid))
    elif name == "zero":
        K = Field(grid, np.zeros(grid.shape))
        psi = Field(grid, np.zeros(grid.shape))
    else:
        raise ValueError(f"unknown kernel preset {name!r}; choose from {KERNEL_PRESETS}")
    if psi_scale < 0:
        raise ValueError("psi scale must keep psi >= 0")
    return KernelPair(K, psi)
