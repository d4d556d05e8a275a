"""Truncated cylindrical Wiener process and regularized diffusion coefficients.

The driving noise is a finite family of independent scalar Brownian motions
W_1..W_kmax. Mode k carries a spatial profile e_k (sup-norm <= 1), a weight
g_k with sum g_k^2 < infinity, and a fixed unit direction v_k, giving the
linear-growth coefficient

    G_k(x, rho, q) = g_k * e_k(x) * (alpha_k * rho * v_k + beta_k * q),

which satisfies |G_k| <= g_k (rho + |q|) and |grad_(rho,q) G_k| <= g_k
pointwise whenever |alpha_k|, |beta_k| <= 1. The regularized coefficient

    F_(k,eps)(rho, u) = chi(eps/rho - 1) * chi(|u| - 1/eps) * G_k(rho, rho u)/rho

vanishes wherever rho <= eps/2 or |u| >= 1/eps + 1, is bounded for each eps,
and obeys the eps-uniform bound |F_(k,eps)| <= g_k (1 + |u|).

Increments are generated by a counter-based Philox stream keyed on the root
seed with the counter encoding (step, path), so ensembles are reproducible
and order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constitutive import cutoff_chi
from .torus import (
    Field,
    TorusGrid,
    coeffs_to_field,
    dprod,
    field_to_coeffs,
    project_modes,
    _field_1c,
)

__all__ = [
    "NoiseModel",
    "WienerPath",
    "coefficient_G",
    "coefficient_F_eps",
    "momentum_noise_increment",
    "eigen_profiles",
    "DEBUG_CHECK_BOUNDS",
]

# When set, every F_(k,eps) evaluation asserts the eps-uniform growth bound.
DEBUG_CHECK_BOUNDS = False

# Riemann zeta(4): total sum of 1/k^4, used for the neglected-tail report.
_ZETA4 = math.pi**4 / 90.0


def eigen_profiles(grid: TorusGrid, k_max: int) -> np.ndarray:
    """First k_max Laplacian eigenfunctions, each normalized to sup-norm 1."""
    out = np.empty((k_max,) + grid.shape)
    for j in range(k_max):
        coeffs = np.zeros(j + 1)
        coeffs[j] = 1.0
        f = _field_1c(grid, coeffs)
        out[j] = f / np.abs(f).max()
    return out


@dataclass(frozen=True)
class NoiseModel:
    """Finite noise family: weights, spatial profiles, couplings, directions."""

    grid: TorusGrid
    g: np.ndarray                  # (k_max,) nonnegative weights
    profiles: np.ndarray           # (k_max,) + grid.shape, sup-norm <= 1
    alpha: np.ndarray              # (k_max,) density couplings, |.| <= 1
    beta: np.ndarray               # (k_max,) momentum couplings, |.| <= 1
    directions: np.ndarray         # (k_max, d) unit vectors
    tail_mass: float = 0.0         # neglected sum_{k > k_max} g_k^2

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 1 or g.size == 0:
            raise ValueError("g must be a nonempty 1-d weight sequence")
        if np.any(g < 0):
            raise ValueError("noise weights g_k must be nonnegative")
        if np.any(np.abs(self.alpha) > 1 + 1e-12) or np.any(np.abs(self.beta) > 1 + 1e-12):
            raise ValueError("couplings must satisfy |alpha_k|, |beta_k| <= 1")
        if np.abs(self.profiles).max() > 1 + 1e-12:
            raise ValueError("profiles must have sup-norm <= 1")
        norms = np.linalg.norm(self.directions, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("directions must be unit vectors")

    @property
    def k_max(self) -> int:
        return int(self.g.shape[0])

    @property
    def sum_g_sq(self) -> float:
        return float(np.sum(np.asarray(self.g) ** 2))

    @classmethod
    def default(cls, grid: TorusGrid, k_max: int = 8, g0: float = 0.1,
                alpha: float = 1.0, beta: float = 1.0) -> "NoiseModel":
        """g_k = g0/k^2, eigenfunction profiles, axis-cycling directions."""
        ks = np.arange(1, k_max + 1, dtype=float)
        g = g0 / ks**2
        dirs = np.zeros((k_max, grid.d))
        for j in range(k_max):
            dirs[j, j % grid.d] = 1.0
        tail = g0**2 * (_ZETA4 - float(np.sum(1.0 / ks**4)))
        return cls(
            grid=grid,
            g=g,
            profiles=eigen_profiles(grid, k_max),
            alpha=np.full(k_max, float(alpha)),
            beta=np.full(k_max, float(beta)),
            directions=dirs,
            tail_mass=tail,
        )


@dataclass(frozen=True)
class WienerPath:
    """Counter-based Brownian increment stream: Normal(0, h) per step and mode."""

    seed: int
    k_max: int
    h: float
    n_steps: int
    path_index: int = 0

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("step size h must be positive")

    def _key(self) -> np.ndarray:
        return np.random.SeedSequence(self.seed).generate_state(2, dtype=np.uint64)

    def increments(self, step_index: int) -> np.ndarray:
        """Increments (dW_1,..,dW_kmax) for one step; pure in (seed, step, path)."""
        if not 0 <= step_index < self.n_steps:
            raise IndexError(f"step {step_index} outside 0..{self.n_steps - 1}")
        counter = np.array([0, 0, step_index, self.path_index], dtype=np.uint64)
        gen = np.random.Generator(np.random.Philox(key=self._key(), counter=counter))
        return gen.normal(0.0, math.sqrt(self.h), size=self.k_max)

    def table(self) -> np.ndarray:
        """All increments as an (n_steps, k_max) array."""
        return np.stack([self.increments(i) for i in range(self.n_steps)])

    def aggregated(self, factor: int) -> np.ndarray:
        """Increments for the coarser step h*factor (consistent refinement)."""
        if self.n_steps % factor:
            raise ValueError("n_steps must be divisible by the aggregation factor")
        return self.table().reshape(self.n_steps // factor, factor, self.k_max).sum(axis=1)


def _check_mode(nm: NoiseModel, k: int) -> int:
    if not 1 <= k <= nm.k_max:
        raise ValueError(f"mode index k={k} outside 1..{nm.k_max}")
    return k - 1


def coefficient_G(k: int, rho: Field, q: Field, nm: NoiseModel) -> Field:
    """Diffusion coefficient G_k(x, rho, q) for density rho and momentum q."""
    j = _check_mode(nm, k)
    grid = rho.grid
    prof = nm.profiles[j]
    base = nm.alpha[j] * rho.data[np.newaxis] * nm.directions[j].reshape((grid.d,) + (1,) * grid.d)
    data = nm.g[j] * prof[np.newaxis] * (base + nm.beta[j] * q.data)
    return Field(grid, data)


def coefficient_F_eps(k: int, rho: Field, u: Field, eps: float, nm: NoiseModel) -> Field:
    """Truncated coefficient F_(k,eps); defined as 0 wherever rho <= eps/2."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    grid = rho.grid
    r = rho.data
    alive = r > eps / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(alive, eps / np.where(alive, r, 1.0) - 1.0, 2.0)
        inv_r = np.where(alive, 1.0 / np.where(alive, r, 1.0), 0.0)
    chi_rho = cutoff_chi(ratio)
    speed = np.sqrt(np.sum(u.data**2, axis=0)) if not u.is_scalar else np.abs(u.data)
    chi_u = cutoff_chi(speed - 1.0 / eps)
    q = Field(grid, r[np.newaxis] * u.data if not u.is_scalar else r * u.data)
    G = coefficient_G(k, rho, q, nm)
    out = Field(grid, (chi_rho * chi_u * inv_r)[np.newaxis] * G.data)
    if DEBUG_CHECK_BOUNDS:
        mag = np.sqrt(np.sum(out.data**2, axis=0))
        excess = float((mag - nm.g[k - 1] * (1.0 + speed)).max())
        if excess > 1e-12:
            raise AssertionError(
                f"eps-uniform bound violated for mode {k}: excess {excess:.3e}"
            )
    return out


def momentum_noise_increment(
    rho: Field,
    u_coeffs: np.ndarray,
    dW: np.ndarray,
    eps: float,
    nm: NoiseModel,
    m: int,
    use_dealias: bool = True,
) -> np.ndarray:
    """Ito increment sum_k P_m(rho * P_m(F_(k,eps)(rho, u))) dW_k in X_m coords.

    Coefficients are evaluated at the supplied (rho, u), i.e. the caller
    freezes the step-start state per the left-endpoint convention.
    """
    dW = np.asarray(dW, dtype=float)
    if dW.shape != (nm.k_max,):
        raise ValueError(f"dW must have shape ({nm.k_max},)")
    grid = rho.grid
    u = coeffs_to_field(grid, u_coeffs)
    out = np.zeros_like(np.asarray(u_coeffs, dtype=float))
    for k in range(1, nm.k_max + 1):
        if dW[k - 1] == 0.0:
            continue
        Fk = coefficient_F_eps(k, rho, u, eps, nm)
        PFk = project_modes(Fk, m)
        rho_PFk = dprod(rho, PFk, use_dealias=use_dealias)
        out += field_to_coeffs(rho_PFk, m) * dW[k - 1]
    return out


def noise_pairings(
    rho: Field,
    u_coeffs: np.ndarray,
    eps: float,
    nm: NoiseModel,
    m: int,
    use_dealias: bool = True,
):
    """Per-mode projected coefficients and the energy pairings of one state.

    Returns (sigma, ito_rate, work_weights): sigma[k] is the X_m coefficient
    array of P_m(rho * P_m(F_(k,eps))), ito_rate = (1/2) sum_k
    integral rho |P_m F_k|^2 dx, and work_weights[k] =
    integral rho u . P_m F_k dx (the integrand of the stochastic work).
    """
    grid = rho.grid
    u = coeffs_to_field(grid, u_coeffs)
    cell = grid.cell_volume
    sigma = []
    ito_rate = 0.0
    work = np.zeros(nm.k_max)
    for k in range(1, nm.k_max + 1):
        Fk = coefficient_F_eps(k, rho, u, eps, nm)
        PFk = project_modes(Fk, m)
        sigma.append(field_to_coeffs(dprod(rho, PFk, use_dealias=use_dealias), m))
        ito_rate += 0.5 * float(np.sum(rho.data * np.sum(PFk.data**2, axis=0)) * cell)
        work[k - 1] = float(np.sum(rho.data * np.sum(u.data * PFk.data, axis=0)) * cell)
    return sigma, ito_rate, work
