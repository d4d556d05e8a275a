"""Velocity Galerkin space machinery: mass operator and momentum drift.

The velocity lives in the span of the first m Laplacian eigenmodes (per
component). "Division by rho" in the momentum update is the inverse of the
density-weighted Gram operator; the Gram matrix is one m x m block shared by
all components because the vector basis is the scalar basis per component.

The drift assembles the six grouped momentum terms (advection, cutoff
pressure gradient, artificial viscosity, viscous stress, attraction
-repulsion, alignment) as X_m coefficients, each retrievable for
diagnostics. Quadratic interaction terms share one dealiased density so that
a uniform velocity is an exact alignment equilibrium and the discrete
alignment pairing identity holds to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigvalsh

from .constitutive import (
    KernelPair,
    PressureLaw,
    ViscosityParams,
    cutoff_chi,
    pressure_delta,
    stress,
)
from .torus import (
    Field,
    TorusGrid,
    coeffs_to_field,
    convolve,
    dealias,
    divergence,
    field_to_coeffs,
    gradient,
    laplacian,
    lp_norm,
    mode_table,
    sym_gradient,
    xm_norm,
    _field_1c,
)

__all__ = [
    "MassOperator",
    "MassOperatorError",
    "mass_apply",
    "mass_solve",
    "mass_lipschitz_gap",
    "LipschitzReport",
    "DriftTerms",
    "galerkin_rhs",
    "max_dealiased_modes",
]


class MassOperatorError(RuntimeError):
    """Gram matrix is not positive definite (density positivity violated)."""


@lru_cache(maxsize=8)
def _basis_matrix(grid: TorusGrid, m: int) -> np.ndarray:
    """Samples of the first m orthonormal eigenfunctions, shape (npoints, m)."""
    W = np.empty((grid.npoints, m))
    for j in range(m):
        coeffs = np.zeros(j + 1)
        coeffs[j] = 1.0
        W[:, j] = _field_1c(grid, coeffs).ravel()
    W.setflags(write=False)
    return W


def max_dealiased_modes(grid: TorusGrid) -> int:
    """Largest m whose modes all survive the 2/3 product rule."""
    tab = mode_table(grid)
    inside = np.all(np.abs(tab.kvecs) <= grid.n // 3, axis=1)
    bad = np.flatnonzero(~inside)
    return int(bad[0]) if bad.size else len(tab.kind)


class MassOperator:
    """Density-weighted Gram operator on X_m and its Cholesky inverse."""

    def __init__(self, rho: Field, m: int, rho_floor: float | None = None,
                 dealias_weight: bool = True):
        grid = rho.grid
        if not rho.is_scalar:
            raise ValueError("mass operator weight must be a scalar density")
        if rho_floor is not None and float(rho.data.min()) < rho_floor:
            raise MassOperatorError(
                f"min density {rho.data.min():.3e} below floor {rho_floor:.3e}"
            )
        self.grid = grid
        self.m = m
        weight = dealias(rho).data if dealias_weight else rho.data
        W = _basis_matrix(grid, m)
        G = W.T @ (W * (weight.ravel() * grid.cell_volume)[:, None])
        self.gram = 0.5 * (G + G.T)  # symmetric by construction
        try:
            self._chol = cho_factor(self.gram, lower=True)
        except LinAlgError:
            raise MassOperatorError(
                f"Gram matrix not positive definite; smallest eigenvalue "
                f"{self.smallest_eigenvalue():.3e}"
            ) from None

    def smallest_eigenvalue(self) -> float:
        return float(eigvalsh(self.gram)[0])

    def apply(self, v: np.ndarray) -> np.ndarray:
        """M_rho v for coefficients shaped (m,) or (m, c)."""
        return self.gram @ np.asarray(v, dtype=float)

    def solve(self, w: np.ndarray) -> np.ndarray:
        """M_rho^{-1} w."""
        return cho_solve(self._chol, np.asarray(w, dtype=float))


def mass_apply(rho: Field, v: np.ndarray) -> np.ndarray:
    return MassOperator(rho, np.asarray(v).shape[0]).apply(v)


def mass_solve(rho: Field, w: np.ndarray, rho_floor: float | None = None) -> np.ndarray:
    return MassOperator(rho, np.asarray(w).shape[0], rho_floor=rho_floor).solve(w)


@dataclass(frozen=True)
class LipschitzReport:
    gap: float            # sup over probes of ||(M1^-1 - M2^-1) v|| / ||v||
    l1_distance: float    # ||rho1 - rho2||_L1
    ratio: float          # gap / l1_distance (0 when both vanish)


def mass_lipschitz_gap(rho1: Field, rho2: Field, m: int, n_probes: int = 16,
                       seed: int = 0, rho_floor: float | None = None) -> LipschitzReport:
    """Empirical operator gap between the two weighted inverses."""
    op1 = MassOperator(rho1, m, rho_floor=rho_floor)
    op2 = MassOperator(rho2, m, rho_floor=rho_floor)
    rng = np.random.default_rng(seed)
    gap = 0.0
    for _ in range(n_probes):
        v = rng.standard_normal(m)
        diff = op1.solve(v) - op2.solve(v)
        gap = max(gap, float(np.linalg.norm(diff) / np.linalg.norm(v)))
    l1 = lp_norm(Field(rho1.grid, rho1.data - rho2.data), 1)
    ratio = gap / l1 if l1 > 0 else 0.0
    return LipschitzReport(gap=gap, l1_distance=l1, ratio=ratio)


@dataclass
class DriftTerms:
    """X_m coefficients of each grouped momentum drift term."""

    advection: np.ndarray      # -P_m div(rho [u]_R x u)
    pressure: np.ndarray       # -P_m chi(||u||-R) grad p_delta(rho)
    visc_reg: np.ndarray       # +P_m eps Lap(rho u)
    stress: np.ndarray         # +P_m div S(Du)
    attraction: np.ndarray     # -P_m rho (grad K * rho)
    alignment: np.ndarray      # +P_m [rho psi*(rho u) - rho u psi*rho]
    source: np.ndarray | None = None
    cutoff_factor: float = 1.0

    @property
    def total(self) -> np.ndarray:
        out = (
            self.advection
            + self.pressure
            + self.visc_reg
            + self.stress
            + self.attraction
            + self.alignment
        )
        if self.source is not None:
            out = out + self.source
        return out


def _div_tensor(grid: TorusGrid, T: np.ndarray) -> np.ndarray:
    """(div T)_j = sum_i d_i T[i, j] for a (d, d)+grid tensor array."""
    d = grid.d
    out = np.empty((d,) + grid.shape)
    for j in range(d):
        out[j] = divergence(Field(grid, T[:, j])).data
    return out


def stress_divergence_coeffs(u_coeffs: np.ndarray, grid: TorusGrid,
                             visc: ViscosityParams) -> np.ndarray:
    """X_m coefficients of div S(Du); depends on u only, reusable per step."""
    m = np.asarray(u_coeffs).shape[0]
    u = coeffs_to_field(grid, u_coeffs)
    Du = sym_gradient(u)
    return field_to_coeffs(Field(grid, _div_tensor(grid, stress(Du, visc).data)), m)


def galerkin_rhs(
    rho: Field,
    u_coeffs: np.ndarray,
    law: PressureLaw,
    visc: ViscosityParams,
    kernels: KernelPair,
    eps: float,
    R: float,
    source: np.ndarray | None = None,
    use_dealias: bool = True,
    stress_coeffs: np.ndarray | None = None,
    total_only: bool = False,
):
    """Full deterministic momentum drift at (rho, u), u frozen in X_m.

    Returns a DriftTerms record, or just the total coefficient array when
    total_only is set (one projection instead of six; used by the inner
    quadrature loop where per-term values are not consumed). A precomputed
    stress_coeffs skips the u-only viscous term.
    """
    grid = rho.grid
    m = np.asarray(u_coeffs).shape[0]
    u = coeffs_to_field(grid, u_coeffs)
    c_R = cutoff_chi(xm_norm(u_coeffs) - R)

    rt = dealias(rho) if use_dealias else rho  # density used in quadratic terms
    q = Field(grid, rt.data[np.newaxis] * u.data)  # rho u, pointwise

    def trunc(f: Field) -> Field:
        return dealias(f) if use_dealias else f

    # advection: -chi * div(rho u x u)
    T = np.einsum("i...,j...->ij...", q.data, u.data)
    adv = -c_R * _div_tensor(grid, trunc(Field(grid, T)).data)

    # cutoff pressure gradient
    p_d = trunc(pressure_delta(rho, law))
    pres = -c_R * gradient(p_d).data

    # artificial viscosity eps * Lap(rho u)
    viscreg = eps * laplacian(trunc(q)).data if eps != 0.0 else np.zeros_like(q.data)

    # viscous stress divergence (linear in u, no dealiasing needed)
    if stress_coeffs is None:
        stress_coeffs = stress_divergence_coeffs(u_coeffs, grid, visc)

    # attraction-repulsion: -rho (grad K * rho)
    gradK_rho = gradient(convolve(rt, kernels.K))
    attr = -trunc(Field(grid, rt.data[np.newaxis] * gradK_rho.data)).data

    # alignment: rho psi*(rho u) - rho u psi*rho, one shared density
    conv_q = convolve(q, kernels.psi)
    conv_r = convolve(rt, kernels.psi)
    align = trunc(
        Field(grid, rt.data[np.newaxis] * conv_q.data - q.data * conv_r.data)
    ).data

    def pm(arr: np.ndarray) -> np.ndarray:
        return field_to_coeffs(Field(grid, arr), m)

    if total_only:
        total = pm(adv + pres + viscreg + attr + align) + stress_coeffs
        if source is not None:
            total = total + np.asarray(source, dtype=float)
        return total

    return DriftTerms(
        advection=pm(adv),
        pressure=pm(pres),
        visc_reg=pm(viscreg),
        stress=stress_coeffs,
        attraction=pm(attr),
        alignment=pm(align),
        source=np.asarray(source, dtype=float) if source is not None else None,
        cutoff_factor=float(c_R),
    )
