"""Numerical certificates for the estimates the solver's analysis rests on.

Everything here is report-style: mass conservation, the energy balance and
its term-by-term dissipation ledger, the alignment double-integral identity,
Brownian moment scaling, the pressure-estimate identity obtained by testing
the momentum equation with grad(invLap(rho - mean)), renormalized continuity
defects for entropy-like functions, and the density log-mass comparisons
used as a strong-convergence proxy in regularization sweeps.

Diagnostic integrands are evaluated with plain pointwise products and exact
circular convolutions (no dealiasing), so discrete rearrangement identities
hold to rounding; time integrals accumulate during stepping, trapezoid per
outer step, which keeps the reports quadrature-consistent with the scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constitutive import (
    KernelPair,
    PressureLaw,
    ViscosityParams,
    pressure_delta,
)
from .torus import (
    Field,
    coeffs_to_field,
    convolve,
    divergence,
    field_to_coeffs,
    gradient,
    inner,
    inv_laplacian,
    mean,
)

__all__ = [
    "EnergyReport",
    "MomentScalingReport",
    "PressureIdentityReport",
    "PressureIdentityTracker",
    "mass_residual",
    "energy_report",
    "alignment_dissipation",
    "alignment_double_sum",
    "velocity_spread",
    "moment_scaling",
    "renormalized_defect",
    "entropy_function",
    "rho_log_rho_integral",
    "evf_gaps",
    "truncation_T",
    "truncation_T_k",
    "truncation_L_k",
]


# --- mass and energy -------------------------------------------------------

def mass_residual(traj) -> float:
    """max_t |integral rho(t) - M| over the recorded step grid."""
    masses = np.asarray(traj.mass)
    return float(np.abs(masses - traj.mass0).max())


@dataclass(frozen=True)
class EnergyReport:
    """All terms of the discrete energy balance at one recorded time."""

    time: float
    kinetic: float               # (1/2) int rho |u|^2
    potential: float             # int P_delta(rho)
    interaction: float           # (1/2) int rho (K*rho)
    stress_dissip: float         # int_0^t int S(Du):Du
    visc_dissip: float           # eps int_0^t int rho |grad u|^2
    density_dissip: float        # eps int_0^t int |grad rho|^2 P''_delta
    alignment_dissip: float      # (1/2) int_0^t triple rho rho psi (u(y)-u(x))^2
    ito_correction: float        # (1/2) int_0^t int rho (P_m F_eps)^2
    stochastic_work: float       # int_0^t int rho u . P_m F_eps dW
    remainder_grad_k: float      # -eps int_0^t int (grad K * rho) . grad rho
    remainder_cutoff: float      # int_0^t int (K*rho) div(rho(u - [u]_R))
    initial_energy: float
    residual: float              # LHS minus RHS, signed

    @property
    def energy(self) -> float:
        return self.kinetic + self.potential + self.interaction

    def dissipation_terms(self) -> dict:
        return {
            "stress_dissip": self.stress_dissip,
            "visc_dissip": self.visc_dissip,
            "density_dissip": self.density_dissip,
            "alignment_dissip": self.alignment_dissip,
        }


def energy_report(traj, tau: float) -> EnergyReport:
    """Assemble the balance at recorded time tau (must be on the step grid)."""
    times = np.asarray(traj.times)
    idx = int(np.argmin(np.abs(times - tau)))
    if abs(times[idx] - tau) > 1e-9 * max(1.0, abs(tau)):
        raise ValueError(f"time {tau} not on the recorded step grid")
    kin = traj.kinetic[idx]
    pot = traj.potential[idx]
    inter = traj.interaction[idx]
    lhs = (
        kin + pot + inter - traj.energy0
        + traj.acc_stress[idx]
        + traj.acc_visc[idx]
        + traj.acc_density[idx]
        + traj.acc_align[idx]
    )
    rhs = (
        traj.acc_work[idx]
        + traj.acc_ito[idx]
        + traj.acc_rem_gradk[idx]
        + traj.acc_rem_cutoff[idx]
    )
    return EnergyReport(
        time=float(times[idx]),
        kinetic=kin,
        potential=pot,
        interaction=inter,
        stress_dissip=traj.acc_stress[idx],
        visc_dissip=traj.acc_visc[idx],
        density_dissip=traj.acc_density[idx],
        alignment_dissip=traj.acc_align[idx],
        ito_correction=traj.acc_ito[idx],
        stochastic_work=traj.acc_work[idx],
        remainder_grad_k=traj.acc_rem_gradk[idx],
        remainder_cutoff=traj.acc_rem_cutoff[idx],
        initial_energy=traj.energy0,
        residual=lhs - rhs,
    )


# --- alignment identity ----------------------------------------------------

def alignment_dissipation(rho: Field, u: Field, psi: Field) -> float:
    """(1/2) iint rho(x) rho(y) psi(x-y) (u(y)-u(x))^2 via the convolution identity.

    Equals int rho|u|^2 (psi*rho) - int rho u . (psi*(rho u)); nonnegative for
    psi >= 0 up to rounding.
    """
    grid = rho.grid
    q = Field(grid, rho.data[np.newaxis] * u.data)
    speed2 = Field(grid, rho.data * np.sum(u.data**2, axis=0))
    term1 = inner(speed2, convolve(rho, psi))
    term2 = inner(q, convolve(q, psi))
    return term1 - term2


def alignment_double_sum(rho: Field, u: Field, psi: Field) -> float:
    """O(n^2) direct double-sum oracle for the alignment double integral (x 1/2)."""
    grid = rho.grid
    n = grid.n
    flat_r = rho.data.ravel()
    flat_u = u.data.reshape(u.data.shape[0], -1)
    idx = np.arange(grid.npoints)
    coords = np.array(np.unravel_index(idx, grid.shape))
    total = 0.0
    psi_flat = psi.data
    for a in range(grid.npoints):
        rel = tuple((coords[:, a][:, None] - coords + n // 2) % n)
        psi_ab = psi_flat[rel]
        du2 = np.sum((flat_u[:, a][:, None] - flat_u) ** 2, axis=0)
        total += float(np.sum(flat_r[a] * flat_r * psi_ab * du2))
    return 0.5 * total * grid.cell_volume**2


def velocity_spread(u_coeffs: np.ndarray) -> float:
    """X_m norm of the velocity minus its constant mode (consensus distance)."""
    return float(np.linalg.norm(np.asarray(u_coeffs)[1:]))


# --- Brownian moment scaling ----------------------------------------------

@dataclass(frozen=True)
class MomentScalingReport:
    r: float
    lags: np.ndarray
    moments: np.ndarray          # E ||P_m(rho u)(lag) - P_m(rho u)(0)||^r
    slope: float | None          # log-log fit, None for a single lag
    ensemble_size: int


def moment_scaling(momentum_series: list, times, r: float, lags) -> MomentScalingReport:
    """Empirical time-increment moments of the projected momentum.

    momentum_series: per path, array (n_times, m, d) of X_m coefficients.
    """
    if len(momentum_series) < 64:
        raise ValueError(f"ensemble of {len(momentum_series)} paths; need >= 64")
    if r < 2:
        raise ValueError("moment order r must be >= 2")
    times = np.asarray(times)
    lags = np.asarray(sorted(lags), dtype=float)
    if np.any(lags <= 0) or lags[-1] > times[-1] - times[0] + 1e-12:
        raise ValueError("lags must be positive and within the horizon")
    moments = np.empty(lags.shape)
    for i, lag in enumerate(lags):
        j = int(np.argmin(np.abs(times - (times[0] + lag))))
        if abs(times[j] - times[0] - lag) > 1e-9:
            raise ValueError(f"lag {lag} not resolved by the step grid")
        vals = [np.linalg.norm(series[j] - series[0]) ** r for series in momentum_series]
        moments[i] = float(np.mean(vals))
    slope = None
    if len(lags) >= 2:
        slope = float(np.polyfit(np.log(lags), np.log(np.maximum(moments, 1e-300)), 1)[0])
    return MomentScalingReport(r=r, lags=lags, moments=moments, slope=slope,
                               ensemble_size=len(momentum_series))


# --- pressure-estimate identity -------------------------------------------

@dataclass(frozen=True)
class PressureIdentityReport:
    lhs: float                    # int_0^T int chi p_delta(rho) rho
    terms: dict                   # I1..I10 by name
    defect: float                 # lhs - sum of terms

    @property
    def terms_total(self) -> float:
        return float(sum(self.terms.values()))


class PressureIdentityTracker:
    """Accumulates the test-function identity phi = grad invLap(rho - avg).

    Each contribution mirrors one momentum term paired with phi, with the two
    eps pieces merged into the self-adjoint form -2 eps int rho u . grad rho.
    The defect is pure discretization error for the scheme as implemented.
    """

    TERM_NAMES = (
        "I1_momentum_flux", "I2_initial", "I3_final", "I4_advection",
        "I5_mean_pressure", "I6_stress", "I7_viscosity", "I8_attraction",
        "I9_alignment", "I10_stochastic",
    )

    def __init__(self, law: PressureLaw, visc: ViscosityParams, kernels: KernelPair,
                 eps: float, m: int):
        self.law = law
        self.visc = visc
        self.kernels = kernels
        self.eps = eps
        self.m = m
        self.lhs = 0.0
        self.terms = {name: 0.0 for name in self.TERM_NAMES}
        self._has_K = float(np.abs(kernels.K.data).max()) > 0.0
        self._has_psi = float(np.abs(kernels.psi.data).max()) > 0.0

    def _phi(self, rho: Field) -> Field:
        return gradient(inv_laplacian(rho))

    def open(self, rho0: Field, u0: Field) -> None:
        q0 = Field(rho0.grid, rho0.data[np.newaxis] * u0.data)
        self.terms["I2_initial"] = -inner(q0, self._phi(rho0))

    def close(self, rhoT: Field, uT: Field) -> None:
        qT = Field(rhoT.grid, rhoT.data[np.newaxis] * uT.data)
        self.terms["I3_final"] = inner(qT, self._phi(rhoT))

    def node_rates(self, rho: Field, u: Field, c_R: float) -> dict:
        """Instantaneous integrands at one (rho, u-frozen) quadrature node."""
        grid = rho.grid
        q = Field(grid, rho.data[np.newaxis] * u.data)
        phi = self._phi(rho)
        p_d = pressure_delta(rho, self.law)
        rho_avg = mean(rho) / grid.measure
        rates = {}
        rates["lhs"] = c_R * inner(p_d, rho)
        rates["I5_mean_pressure"] = c_R * rho_avg * mean(p_d)
        rates["I1_momentum_flux"] = c_R * inner(
            q, gradient(inv_laplacian(divergence(q)))
        )
        # Hessian of invLap(rho - avg)
        H = np.empty((grid.d, grid.d) + grid.shape)
        for a, comp in enumerate(phi.data):
            H[a] = gradient(Field(grid, comp)).data
        uu = np.einsum("i...,j...->ij...", q.data, u.data)
        rates["I4_advection"] = -c_R * float(np.sum(uu * H) * grid.cell_volume)
        div_u = divergence(u)
        rho_prime = Field(grid, rho.data - rho_avg)
        rates["I6_stress"] = (self.visc.lam + 2 * self.visc.mu) * inner(div_u, rho_prime)
        if self.eps != 0.0:
            grad_rho = gradient(rho)
            rates["I7_viscosity"] = -2.0 * self.eps * float(
                np.sum(q.data * grad_rho.data) * grid.cell_volume
            )
        else:
            rates["I7_viscosity"] = 0.0
        if self._has_K:
            gKr = gradient(convolve(rho, self.kernels.K))
            rates["I8_attraction"] = float(
                np.sum(rho.data * gKr.data * phi.data) * grid.cell_volume
            )
        else:
            rates["I8_attraction"] = 0.0
        if self._has_psi:
            conv_q = convolve(q, self.kernels.psi)
            conv_r = convolve(rho, self.kernels.psi)
            align = conv_q.data - u.data * conv_r.data
            rates["I9_alignment"] = -float(
                np.sum(rho.data * phi.data * align) * grid.cell_volume
            )
        else:
            rates["I9_alignment"] = 0.0
        return rates

    def add_step(self, rhos: list, u: Field, c_R: float, weights: np.ndarray,
                 sigma: list | None, dW: np.ndarray | None) -> None:
        """Trapezoid the node rates over one outer step; left-point noise term."""
        for w, rho in zip(weights, rhos):
            rates = self.node_rates(rho, u, c_R)
            self.lhs += w * rates.pop("lhs")
            for name, val in rates.items():
                self.terms[name] += w * val
        if sigma is not None and dW is not None:
            phi0 = field_to_coeffs(self._phi(rhos[0]), self.m)
            for k, sig in enumerate(sigma):
                self.terms["I10_stochastic"] -= float(np.sum(sig * phi0)) * dW[k]

    def report(self) -> PressureIdentityReport:
        return PressureIdentityReport(
            lhs=self.lhs,
            terms=dict(self.terms),
            defect=self.lhs - float(sum(self.terms.values())),
        )


# --- renormalized continuity ----------------------------------------------

def entropy_function(name: str, k: float = 1.0):
    """(b, b', b'') triple for the preset entropy families."""
    if name == "linear":
        return (lambda z: z, lambda z: np.ones_like(z), lambda z: np.zeros_like(z))
    if name == "square":
        return (lambda z: z**2, lambda z: 2.0 * z, lambda z: np.full_like(z, 2.0))
    if name == "rho_log_rho":
        def b(z):
            zc = np.maximum(z, 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(zc > 0, zc * np.log(np.where(zc > 0, zc, 1.0)), 0.0)
            return out

        def db(z):
            zc = np.maximum(z, 1e-300)
            return np.log(zc) + 1.0

        def d2b(z):
            return 1.0 / np.maximum(z, 1e-300)

        return (b, db, d2b)
    if name == "T_k":
        return (
            lambda z: truncation_T_k(z, k),
            lambda z: truncation_T_prime(np.asarray(z, dtype=float) / k),
            lambda z: truncation_T_second(np.asarray(z, dtype=float) / k) / k,
        )
    if name == "L_k":
        def db(z):
            z = np.maximum(np.asarray(z, dtype=float), 1e-300)
            low = np.log(z) + 1.0
            high = math.log(k) + _A(z / k) + truncation_T_k(z, k) / z
            return np.where(z <= k, low, high)

        def d2b(z):
            z = np.maximum(np.asarray(z, dtype=float), 1e-300)
            return truncation_T_prime(z / k) / z

        return (lambda z: truncation_L_k(z, k), db, d2b)
    raise ValueError(f"unknown entropy preset {name!r}")


def renormalized_defect(traj, b, db=None, d2b=None) -> tuple:
    """Per-step integrated residual of the renormalized continuity balance.

    defect_n = int b(rho_{n+1}) - int b(rho_n)
               + int_step [ int (b'(rho) rho - b(rho)) div v + eps int b''(rho)|grad rho|^2 ]

    with v the truncated transport velocity frozen over the step. Requires a
    trajectory recorded with store_density_series=True. For b(z)=z this is
    the per-step mass defect; divergence-form terms integrate to zero.
    """
    if isinstance(b, str):
        b, db, d2b = entropy_function(b)
    if traj.density_series is None:
        raise ValueError("trajectory lacks a density series; rerun with store_density_series")
    grid = traj.grid
    cell = grid.cell_volume
    eps = traj.params.eps
    out_t, out_d = [], []
    for n in range(len(traj.density_series) - 1):
        r0 = traj.density_series[n]
        r1 = traj.density_series[n + 1]
        h_n = traj.times[n + 1] - traj.times[n]
        v = coeffs_to_field(grid, traj.transport_series[n])
        div_v = divergence(v).data

        def rate(r):
            fld = Field(grid, r)
            flux = float(np.sum((db(r) * r - b(r)) * div_v) * cell)
            if eps != 0.0:
                g = gradient(fld)
                flux += eps * float(np.sum(d2b(r) * np.sum(g.data**2, axis=0)) * cell)
            return flux

        delta_b = float(np.sum(b(r1) - b(r0)) * cell)
        defect = delta_b + 0.5 * h_n * (rate(r0) + rate(r1))
        out_t.append(traj.times[n + 1])
        out_d.append(defect)
    return np.asarray(out_t), np.asarray(out_d)


# --- effective-viscous-flux proxy -----------------------------------------

def rho_log_rho_integral(rho: Field) -> float:
    """int rho log rho with the continuous extension 0 at rho = 0."""
    r = np.maximum(rho.data, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(r > 0, r * np.log(np.where(r > 0, r, 1.0)), 0.0)
    return float(np.sum(vals) * rho.grid.cell_volume)


@dataclass(frozen=True)
class EvfReport:
    labels: list                 # sweep values, coarse to fine
    series: list                 # per member: array of int rho log rho over time
    gaps: np.ndarray             # successive max-over-time differences

    @property
    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.gaps) <= 1e-15)) if len(self.gaps) > 1 else True


def evf_gaps(labels, trajectories) -> EvfReport:
    """Pairwise log-mass gaps between successive sweep members (shared noise)."""
    series = [np.asarray(t.rho_log_rho) for t in trajectories]
    gaps = []
    for a in range(len(series) - 1):
        ta = np.round(np.asarray(trajectories[a].times), 12)
        tb = np.round(np.asarray(trajectories[a + 1].times), 12)
        common = np.intersect1d(ta, tb)
        ia = np.searchsorted(ta, common)
        ib = np.searchsorted(tb, common)
        gaps.append(float(np.abs(series[a][ia] - series[a + 1][ib]).max()))
    return EvfReport(labels=list(labels), series=series, gaps=np.asarray(gaps))


# --- smooth truncation toolbox ---------------------------------------------

def truncation_T(z):
    """Concave C^1 plateau function: z below 1, 2 above 3, quadratic between."""
    z = np.asarray(z, dtype=float)
    s = (z - 1.0) / 2.0
    mid = 1.0 + 2.0 * s - s**2
    out = np.where(z <= 1.0, z, np.where(z >= 3.0, 2.0, mid))
    return float(out) if out.ndim == 0 else out


def truncation_T_prime(sigma):
    """T'(sigma): 1 below 1, (3 - sigma)/2 on [1, 3], 0 above."""
    sigma = np.asarray(sigma, dtype=float)
    out = np.where(sigma <= 1.0, 1.0, np.where(sigma >= 3.0, 0.0, (3.0 - sigma) / 2.0))
    return float(out) if out.ndim == 0 else out


def truncation_T_second(sigma):
    """T''(sigma): -1/2 on (1, 3), 0 outside."""
    sigma = np.asarray(sigma, dtype=float)
    out = np.where((sigma > 1.0) & (sigma < 3.0), -0.5, 0.0)
    return float(out) if out.ndim == 0 else out


def truncation_T_k(z, k: float):
    """T_k(z) = k T(z/k): identity below k, plateau 2k above 3k.

    The linear region returns z itself (k*(z/k) would round twice).
    """
    if k < 1:
        raise ValueError("truncation level k must be >= 1")
    z = np.asarray(z, dtype=float)
    out = np.where(z <= k, z, k * truncation_T(z / k))
    return float(out) if out.ndim == 0 else out


def _A(sigma):
    """integral_1^sigma T(t)/t^2 dt in closed form (T quadratic on [1,3])."""
    sigma = np.asarray(sigma, dtype=float)
    sig = np.maximum(sigma, 1e-300)
    mid = -sig / 4.0 + 1.5 * np.log(sig) + 1.0 / (4.0 * sig)
    hi = 1.5 * math.log(3.0) - 2.0 / sig
    return np.where(sigma <= 1.0, 0.0, np.where(sigma <= 3.0, mid, hi))


def truncation_L_k(z, k: float):
    """L_k(z) = z log z below k, then z log k + z integral_k^z T_k(s)/s^2 ds."""
    if k < 1:
        raise ValueError("truncation level k must be >= 1")
    z = np.asarray(z, dtype=float)
    zc = np.maximum(z, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        low = np.where(zc > 0, zc * np.log(np.where(zc > 0, zc, 1.0)), 0.0)
    high = zc * math.log(k) + zc * _A(zc / k)
    out = np.where(zc <= k, low, high)
    return float(out) if out.ndim == 0 else out
