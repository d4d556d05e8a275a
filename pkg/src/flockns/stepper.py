"""Time-split scheme on [nh, nh+h): density substep then momentum update.

Per outer step, the density solves the parabolic transport problem with the
velocity frozen (and cutoff) at the step start, via explicit dealiased
advection and exact-in-spectrum diffusion on an inner subgrid; the momentum
functional accumulates the trapezoid drift over the inner density nodes with
the velocity frozen, plus the left-endpoint Ito noise increment, and the new
velocity is the weighted-Gram inverse applied at the step's end density
(configurable to the start density).

Runners: single path, reproducible ensembles (one root seed, counter-split
per path), and common-noise refinement sweeps along h, m, eps or delta.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .constitutive import (
    KernelPair,
    PositivityError,
    PressureLaw,
    ViscosityParams,
    clamp_density,
    cutoff_chi,
    potential_delta,
    potential_second_delta,
    stress_dissipation,
    velocity_truncate,
)
from .diagnostics import (
    PressureIdentityTracker,
    alignment_dissipation,
    rho_log_rho_integral,
)
from .galerkin import (MassOperator, galerkin_rhs, max_dealiased_modes,
                       stress_divergence_coeffs)
from .noise import NoiseModel, WienerPath, noise_pairings
from .torus import (
    Field,
    TorusGrid,
    coeffs_to_field,
    convolve,
    divergence,
    dprod,
    field_to_coeffs,
    gradient,
    mean,
    mode_capacity,
    sym_gradient,
    xm_norm,
    _ksq,
)

__all__ = [
    "SchemeParams",
    "GalerkinState",
    "Trajectory",
    "Stepper",
    "run_path",
    "run_ensemble",
    "run_sweep",
    "perturbation_gap",
    "EnsembleStats",
    "SweepReport",
]


@dataclass(frozen=True)
class SchemeParams:
    """All regularization and discretization knobs of one scheme instance."""

    d: int
    n: int
    m: int
    h: float
    T: float
    eps: float = 0.01
    delta: float = 0.01
    R: float = 1.0e6
    a: float = 1.0
    gamma: float = 2.0
    mu: float = 0.1
    lam: float = 0.1
    rho_floor: float = 1.0e-8
    sub_steps: int | None = None
    mass_weight_time: str = "end"
    drift_off: bool = False
    use_dealias: bool = True

    def __post_init__(self):
        if self.h <= 0 or self.T <= 0:
            raise ValueError("step size h and horizon T must be positive")
        if self.T < self.h:
            raise ValueError("horizon T must cover at least one step")
        if self.eps < 0 or self.delta < 0:
            raise ValueError("eps and delta must be nonnegative")
        if self.R <= 0:
            raise ValueError("velocity cutoff R must be positive")
        if self.mass_weight_time not in ("start", "end"):
            raise ValueError("mass_weight_time must be 'start' or 'end'")
        if self.sub_steps is not None and self.sub_steps < 1:
            raise ValueError("sub_steps must be >= 1")
        cap = mode_capacity(self.grid)
        if not 1 <= self.m <= cap:
            raise ValueError(f"m={self.m} outside 1..{cap} for n={self.n}, d={self.d}")
        if self.rho_floor <= 0:
            raise ValueError("rho_floor must be positive")
        self.law, self.visc  # constructor invariants of the derived objects

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid(self.d, self.n)

    @property
    def law(self) -> PressureLaw:
        return PressureLaw(a=self.a, gamma=self.gamma, delta=self.delta)

    @property
    def visc(self) -> ViscosityParams:
        return ViscosityParams(mu=self.mu, lam=self.lam)

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.T / self.h - 1e-9))

    @property
    def h_last(self) -> float:
        return self.T - (self.n_steps - 1) * self.h

    def step_times(self) -> np.ndarray:
        times = np.array([j * self.h for j in range(self.n_steps)] + [self.T])
        times[-1] = self.T
        return times


@dataclass
class GalerkinState:
    rho: Field
    u_coeffs: np.ndarray  # (m, d)
    time: float

    @property
    def mass(self) -> float:
        return mean(self.rho)


@dataclass
class Trajectory:
    """Per-step records, cumulative energy ledgers, and snapshots of one path."""

    params: SchemeParams
    seed: int | None
    grid: TorusGrid
    mass0: float
    energy0: float
    times: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    min_rho: list = field(default_factory=list)
    u_norm: list = field(default_factory=list)
    cutoff_factor: list = field(default_factory=list)
    post_tau: list = field(default_factory=list)
    kinetic: list = field(default_factory=list)
    potential: list = field(default_factory=list)
    interaction: list = field(default_factory=list)
    rho_log_rho: list = field(default_factory=list)
    acc_stress: list = field(default_factory=list)
    acc_visc: list = field(default_factory=list)
    acc_density: list = field(default_factory=list)
    acc_align: list = field(default_factory=list)
    acc_ito: list = field(default_factory=list)
    acc_work: list = field(default_factory=list)
    acc_rem_gradk: list = field(default_factory=list)
    acc_rem_cutoff: list = field(default_factory=list)
    momentum_series: list = field(default_factory=list)
    velocity_series: list = field(default_factory=list)
    transport_series: list = field(default_factory=list)
    density_series: list | None = None
    snapshots: dict = field(default_factory=dict)
    tau_R: float | None = None
    cfl_max: float = 0.0
    identity: object | None = None

    def final_state(self) -> GalerkinState:
        t = self.times[-1]
        rho_data, u_coeffs = self.snapshots[round(t, 12)]
        return GalerkinState(Field(self.grid, rho_data.copy()), u_coeffs.copy(), t)


class Stepper:
    """Owns one scheme instance: parameters, kernels, noise model, source."""

    def __init__(self, params: SchemeParams, kernels: KernelPair,
                 noise_model: NoiseModel | None = None, source=None):
        if kernels.grid != params.grid:
            raise ValueError("kernels live on a different grid")
        if noise_model is not None and noise_model.grid != params.grid:
            raise ValueError("noise model lives on a different grid")
        self.params = params
        self.grid = params.grid
        self.kernels = kernels
        self.noise = noise_model
        self.source = source
        self.law = params.law
        self.visc = params.visc
        self._has_K = float(np.abs(kernels.K.data).max()) > 0.0
        self._has_psi = float(np.abs(kernels.psi.data).max()) > 0.0
        if params.use_dealias and params.m > max_dealiased_modes(self.grid):
            warnings.warn(
                f"m={params.m} exceeds the dealiased band "
                f"({max_dealiased_modes(self.grid)} modes); products will clip X_m",
                stacklevel=2,
            )

    # -- density substep ----------------------------------------------------

    def density_substep(self, rho_n: Field, u_frozen: np.ndarray, h_step: float):
        """Inner IMEX sweep of the transport-diffusion problem.

        Returns the density at every inner node (consumed by the momentum
        quadrature), the truncated transport coefficients, and the advective
        CFL ratio."""
        params = self.params
        grid = self.grid
        v_coeffs = velocity_truncate(u_frozen, params.R)
        v = coeffs_to_field(grid, v_coeffs)
        vmax = float(np.sqrt(np.sum(v.data**2, axis=0)).max())
        if params.sub_steps is not None:
            S = params.sub_steps
        else:
            S = max(8, int(math.ceil(h_step * vmax * grid.n / 2.0)))
        h_in = h_step / S
        cfl = h_in * vmax * grid.n / 2.0
        if cfl > 1.0:
            warnings.warn(f"inner advective CFL ratio {cfl:.3f} > 1", stacklevel=2)
        decay = None
        if params.eps > 0:
            decay = np.exp(-params.eps * math.pi**2 * _ksq(grid) * h_in)
        rhos = [rho_n]
        rho = rho_n
        axes = tuple(range(-grid.d, 0))
        for _ in range(S):
            flux = dprod(rho, v, use_dealias=params.use_dealias)
            data = rho.data - h_in * divergence(flux).data
            if decay is not None:
                data = np.real(np.fft.ifftn(np.fft.fftn(data, axes=axes) * decay, axes=axes))
            clamp_density(data, "density substep")  # abort on genuine negativity
            rho = Field(grid, data)
            rhos.append(rho)
        return rhos, v_coeffs, cfl

    # -- momentum update ------------------------------------------------------

    def momentum_update(self, state: GalerkinState, rhos: list, dW: np.ndarray | None,
                        h_step: float):
        """Accumulated momentum functional and its weighted-Gram inversion."""
        params = self.params
        grid = self.grid
        u_n = state.u_coeffs
        u_field = coeffs_to_field(grid, u_n)
        b = field_to_coeffs(dprod(state.rho, u_field, use_dealias=params.use_dealias),
                            params.m)

        S = len(rhos) - 1
        h_in = h_step / S
        weights = np.full(S + 1, h_in)
        weights[0] = weights[-1] = h_in / 2.0

        drift_int = np.zeros_like(b)
        if not params.drift_off:
            st_coeffs = stress_divergence_coeffs(u_n, grid, self.visc)
            for i, (w, rho_i) in enumerate(zip(weights, rhos)):
                src = self.source(state.time + i * h_in) if self.source is not None else None
                drift_int += w * galerkin_rhs(
                    rho_i, u_n, self.law, self.visc, self.kernels,
                    eps=params.eps, R=params.R, source=src,
                    use_dealias=params.use_dealias,
                    stress_coeffs=st_coeffs, total_only=True,
                )

        noise_incr = np.zeros_like(b)
        sigma = ito_rate = work = None
        if dW is not None and self.noise is not None:
            sigma, ito_rate, work = noise_pairings(
                state.rho, u_n, params.eps, self.noise, params.m,
                use_dealias=params.use_dealias,
            )
            for k, sig in enumerate(sigma):
                noise_incr += sig * dW[k]

        b_new = b + drift_int + noise_incr
        rho_mass = rhos[-1] if params.mass_weight_time == "end" else rhos[0]
        op = MassOperator(rho_mass, params.m, rho_floor=params.rho_floor)
        u_new = op.solve(b_new)
        if not np.all(np.isfinite(u_new)):
            raise FloatingPointError("non-finite velocity coefficients after update")
        return u_new, sigma, ito_rate, work

    # -- recording helpers ----------------------------------------------------

    def _pointwise_energy(self, state: GalerkinState):
        grid = self.grid
        u = coeffs_to_field(grid, state.u_coeffs)
        cell = grid.cell_volume
        kin = 0.5 * float(np.sum(state.rho.data * np.sum(u.data**2, axis=0)) * cell)
        pot = mean(potential_delta(state.rho, self.law))
        inter = 0.0
        if self._has_K:
            inter = 0.5 * float(
                np.sum(state.rho.data * convolve(state.rho, self.kernels.K).data) * cell
            )
        return kin, pot, inter

    def _record(self, traj: Trajectory, state: GalerkinState, cutoff: float):
        kin, pot, inter = self._pointwise_energy(state)
        traj.times.append(state.time)
        traj.mass.append(state.mass)
        traj.min_rho.append(float(state.rho.data.min()))
        traj.u_norm.append(xm_norm(state.u_coeffs))
        traj.cutoff_factor.append(cutoff)
        traj.post_tau.append(traj.tau_R is not None)
        traj.kinetic.append(kin)
        traj.potential.append(pot)
        traj.interaction.append(inter)
        traj.rho_log_rho.append(rho_log_rho_integral(state.rho))
        qm = field_to_coeffs(
            dprod(state.rho, coeffs_to_field(self.grid, state.u_coeffs),
                  use_dealias=self.params.use_dealias),
            self.params.m,
        )
        traj.momentum_series.append(qm)
        traj.velocity_series.append(state.u_coeffs.copy())
        if traj.density_series is not None:
            traj.density_series.append(state.rho.data.copy())

    def _accumulate_energy(self, traj: Trajectory, state, rhos, u_field, c_R,
                           h_step, dW, sigma, ito_rate, work):
        params = self.params
        grid = self.grid
        cell = grid.cell_volume
        ends = (rhos[0], rhos[-1])
        w2 = (h_step / 2.0, h_step / 2.0)

        stress_rate = mean(stress_dissipation(sym_gradient(u_field), self.visc))
        d_stress = h_step * stress_rate

        grad_u2 = np.zeros(grid.shape)
        if params.eps > 0:
            for comp in u_field.data:
                g = gradient(Field(grid, comp))
                grad_u2 += np.sum(g.data**2, axis=0)

        d_visc = d_dens = d_align = d_remk = d_remc = 0.0
        for w, rho_i in zip(w2, ends):
            if params.eps > 0:
                d_visc += params.eps * w * float(np.sum(rho_i.data * grad_u2) * cell)
                grad_rho = gradient(rho_i)
                grad_rho2 = np.sum(grad_rho.data**2, axis=0)
                psec = potential_second_delta(rho_i, self.law).data
                d_dens += params.eps * w * float(np.sum(grad_rho2 * psec) * cell)
                if self._has_K:
                    gKr = gradient(convolve(rho_i, self.kernels.K))
                    d_remk -= params.eps * w * float(
                        np.sum(gKr.data * grad_rho.data) * cell
                    )
            if self._has_psi:
                d_align += w * alignment_dissipation(rho_i, u_field, self.kernels.psi)
            if self._has_K and c_R < 1.0:
                q_i = Field(grid, rho_i.data[np.newaxis] * u_field.data)
                d_remc += (1.0 - c_R) * w * float(
                    np.sum(convolve(rho_i, self.kernels.K).data * divergence(q_i).data)
                    * cell
                )

        d_ito = h_step * ito_rate if ito_rate is not None else 0.0
        d_work = float(np.dot(work, dW)) if work is not None else 0.0

        traj.acc_stress.append(traj.acc_stress[-1] + d_stress)
        traj.acc_visc.append(traj.acc_visc[-1] + d_visc)
        traj.acc_density.append(traj.acc_density[-1] + d_dens)
        traj.acc_align.append(traj.acc_align[-1] + d_align)
        traj.acc_ito.append(traj.acc_ito[-1] + d_ito)
        traj.acc_work.append(traj.acc_work[-1] + d_work)
        traj.acc_rem_gradk.append(traj.acc_rem_gradk[-1] + d_remk)
        traj.acc_rem_cutoff.append(traj.acc_rem_cutoff[-1] + d_remc)

    # -- full run -------------------------------------------------------------

    def run(self, rho0: Field, u0_coeffs: np.ndarray, noise_table: np.ndarray | None = None,
            snapshot_times=(), store_density_series: bool = False,
            track_identity: bool = False, seed: int | None = None) -> Trajectory:
        params = self.params
        grid = self.grid
        if rho0.grid != grid:
            raise ValueError("initial density lives on a different grid")
        if float(rho0.data.min()) <= 0.0:
            idx = tuple(int(i) for i in
                        np.unravel_index(int(np.argmin(rho0.data)), rho0.data.shape))
            raise PositivityError(idx, float(rho0.data.min()), "initial data")
        u0 = np.asarray(u0_coeffs, dtype=float)
        if u0.shape != (params.m, params.d):
            raise ValueError(f"u0 coefficients must have shape ({params.m}, {params.d})")
        if noise_table is not None:
            noise_table = np.asarray(noise_table, dtype=float)
            if noise_table.shape[0] != params.n_steps:
                raise ValueError("noise table does not cover the step grid")

        state = GalerkinState(rho0.copy(), u0.copy(), 0.0)
        kin, pot, inter = self._pointwise_energy(state)
        traj = Trajectory(
            params=params, seed=seed, grid=grid,
            mass0=state.mass, energy0=kin + pot + inter,
            density_series=[] if store_density_series else None,
        )
        for acc in (traj.acc_stress, traj.acc_visc, traj.acc_density, traj.acc_align,
                    traj.acc_ito, traj.acc_work, traj.acc_rem_gradk, traj.acc_rem_cutoff):
            acc.append(0.0)
        if xm_norm(state.u_coeffs) > params.R:
            traj.tau_R = 0.0
        self._record(traj, state, cutoff_chi(xm_norm(state.u_coeffs) - params.R))

        tracker = None
        if track_identity:
            tracker = PressureIdentityTracker(self.law, self.visc, self.kernels,
                                              params.eps, params.m)
            tracker.open(rho0, coeffs_to_field(grid, u0))

        snap_req = sorted(set(float(t) for t in snapshot_times))
        times = params.step_times()
        self._snapshot(traj, state)

        for j in range(params.n_steps):
            h_step = times[j + 1] - times[j]
            dW = noise_table[j] if noise_table is not None else None
            u_n = state.u_coeffs
            c_R = float(cutoff_chi(xm_norm(u_n) - params.R))
            u_field = coeffs_to_field(grid, u_n)

            rhos, v_coeffs, cfl = self.density_substep(state.rho, u_n, h_step)
            traj.cfl_max = max(traj.cfl_max, cfl)
            traj.transport_series.append(v_coeffs)

            u_new, sigma, ito_rate, work = self.momentum_update(state, rhos, dW, h_step)

            self._accumulate_energy(traj, state, rhos, u_field, c_R, h_step,
                                    dW, sigma, ito_rate, work)
            if tracker is not None:
                tracker.add_step([rhos[0], rhos[-1]], u_field, c_R,
                                 np.array([h_step / 2.0, h_step / 2.0]), sigma, dW)

            state = GalerkinState(rhos[-1], u_new, float(times[j + 1]))
            if traj.tau_R is None and xm_norm(u_new) > params.R:
                traj.tau_R = state.time
            self._record(traj, state, c_R)
            if any(abs(state.time - s) < 1e-9 for s in snap_req) or j == params.n_steps - 1:
                self._snapshot(traj, state)

        if tracker is not None:
            tracker.close(state.rho, coeffs_to_field(grid, state.u_coeffs))
            traj.identity = tracker.report()
        return traj

    def _snapshot(self, traj: Trajectory, state: GalerkinState):
        traj.snapshots[round(state.time, 12)] = (state.rho.data.copy(),
                                                 state.u_coeffs.copy())


def _noise_table(params: SchemeParams, nm: NoiseModel | None, seed: int,
                 path_index: int) -> np.ndarray | None:
    if nm is None:
        return None
    path = WienerPath(seed=seed, k_max=nm.k_max, h=params.h,
                      n_steps=params.n_steps, path_index=path_index)
    table = path.table()
    if abs(params.h_last - params.h) > 1e-12 * params.h:
        table[-1] *= math.sqrt(params.h_last / params.h)
    return table


def run_path(params: SchemeParams, kernels: KernelPair, nm: NoiseModel | None,
             rho0: Field, u0_coeffs: np.ndarray, seed: int = 0, path_index: int = 0,
             source=None, **run_kw) -> Trajectory:
    """One path: deterministic in (seed, path_index, params, initial data)."""
    stepper = Stepper(params, kernels, nm, source=source)
    table = _noise_table(params, nm, seed, path_index)
    return stepper.run(rho0, u0_coeffs, noise_table=table, seed=seed, **run_kw)


@dataclass
class EnsembleStats:
    """Order-independent per-time moments over a seeded path ensemble."""

    times: np.ndarray
    n_paths: int
    root_seed: int
    mass_mean: np.ndarray
    mass_var: np.ndarray
    energy_mean: np.ndarray
    energy_var: np.ndarray
    u_norm_mean: np.ndarray
    u_norm_var: np.ndarray
    raw_moments: dict            # quantity -> {r: E[quantity^r] per time}
    residuals: np.ndarray        # final-time energy residual per path
    trajectories: list


def run_ensemble(params: SchemeParams, kernels: KernelPair, nm: NoiseModel | None,
                 rho0: Field, u0_coeffs: np.ndarray, n_paths: int, root_seed: int = 0,
                 threads: int = 1, r_moments=(2,), **run_kw) -> EnsembleStats:
    """Fan paths over workers; reductions are fixed-order, thread-count free."""
    from .diagnostics import energy_report

    def one(i: int) -> Trajectory:
        return run_path(params, kernels, nm, rho0, u0_coeffs,
                        seed=root_seed, path_index=i, **run_kw)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trajs = list(pool.map(one, range(n_paths)))
    else:
        trajs = [one(i) for i in range(n_paths)]

    times = np.asarray(trajs[0].times)
    mass = np.array([t.mass for t in trajs])
    energy = np.array(
        [np.asarray(t.kinetic) + np.asarray(t.potential) + np.asarray(t.interaction)
         for t in trajs]
    )
    u_norm = np.array([t.u_norm for t in trajs])
    residuals = np.array([energy_report(t, times[-1]).residual for t in trajs])
    return EnsembleStats(
        times=times,
        n_paths=n_paths,
        root_seed=root_seed,
        mass_mean=mass.mean(axis=0),
        mass_var=mass.var(axis=0, ddof=1) if n_paths > 1 else np.zeros_like(times),
        energy_mean=energy.mean(axis=0),
        energy_var=energy.var(axis=0, ddof=1) if n_paths > 1 else np.zeros_like(times),
        u_norm_mean=u_norm.mean(axis=0),
        u_norm_var=u_norm.var(axis=0, ddof=1) if n_paths > 1 else np.zeros_like(times),
        raw_moments={
            name: {r: np.mean(series**r, axis=0) for r in r_moments}
            for name, series in (("mass", mass), ("energy", energy), ("u_norm", u_norm))
        },
        residuals=residuals,
        trajectories=trajs,
    )


@dataclass
class SweepReport:
    """Common-noise refinement study along one regularization axis."""

    axis: str
    values: list                  # ordered coarse to fine
    rho_gaps: np.ndarray          # L2 gaps of rho(T) between successive members
    momentum_gaps: np.ndarray     # L2 gaps of (rho u)(T)
    evf: object                   # EvfReport on int rho log rho
    energy_lhs_max: list          # per member: max over time of the energy LHS
    trajectories: list


_SWEEP_AXES = ("h", "m", "eps", "delta")


def run_sweep(params: SchemeParams, axis: str, values, kernels: KernelPair,
              nm: NoiseModel | None, rho0: Field, u0_coeffs: np.ndarray,
              seed: int = 0, **run_kw) -> SweepReport:
    """Run the axis sweep under one shared Wiener path (refinement-coupled)."""
    from .diagnostics import evf_gaps

    if axis not in _SWEEP_AXES:
        raise ValueError(f"sweep axis must be one of {_SWEEP_AXES}")
    values = list(values)
    if len(values) < 2:
        raise ValueError("sweep needs at least two values")
    ordered = sorted(values) if axis == "m" else sorted(values, reverse=True)

    tables = {}
    if nm is not None:
        if axis == "h":
            h_fine = min(values)
            base = replace(params, h=h_fine)
            if abs(base.h_last - h_fine) > 1e-12:
                raise ValueError("T must be an integer multiple of the finest h")
            fine_table = _noise_table(base, nm, seed, 0)
            for v in ordered:
                factor = v / h_fine
                if abs(factor - round(factor)) > 1e-9:
                    raise ValueError("h values must be integer multiples of the finest")
                q = int(round(factor))
                if fine_table.shape[0] % q:
                    raise ValueError(f"T must be an integer multiple of h={v}")
                tables[v] = fine_table.reshape(-1, q, nm.k_max).sum(axis=1)
        else:
            tables = {v: _noise_table(params, nm, seed, 0) for v in ordered}

    trajs = []
    for v in ordered:
        p_v = replace(params, **{axis: (int(v) if axis == "m" else float(v))})
        stepper = Stepper(p_v, kernels, nm)
        u0 = u0_coeffs
        if axis == "m":
            u0 = _resize_coeffs(u0_coeffs, int(v))
        trajs.append(stepper.run(rho0, u0, noise_table=tables.get(v), seed=seed, **run_kw))

    grid = params.grid
    cell = grid.cell_volume
    rho_gaps, mom_gaps = [], []
    for a in range(len(trajs) - 1):
        ra, ua = trajs[a].snapshots[round(params.T, 12)]
        rb, ub = trajs[a + 1].snapshots[round(params.T, 12)]
        rho_gaps.append(math.sqrt(float(np.sum((ra - rb) ** 2)) * cell))
        qa = ra[np.newaxis] * coeffs_to_field(grid, ua).data
        qb = rb[np.newaxis] * coeffs_to_field(grid, ub).data
        mom_gaps.append(math.sqrt(float(np.sum((qa - qb) ** 2)) * cell))

    lhs_max = []
    for t in trajs:
        series = (
            np.asarray(t.kinetic) + np.asarray(t.potential) + np.asarray(t.interaction)
            + np.asarray(t.acc_stress) + np.asarray(t.acc_visc)
            + np.asarray(t.acc_density) + np.asarray(t.acc_align)
        )
        lhs_max.append(float(series.max()))

    return SweepReport(
        axis=axis,
        values=ordered,
        rho_gaps=np.asarray(rho_gaps),
        momentum_gaps=np.asarray(mom_gaps),
        evf=evf_gaps(ordered, trajs),
        energy_lhs_max=lhs_max,
        trajectories=trajs,
    )


def _resize_coeffs(u0: np.ndarray, m: int) -> np.ndarray:
    out = np.zeros((m, u0.shape[1]))
    take = min(m, u0.shape[0])
    out[:take] = u0[:take]
    return out


def perturbation_gap(params: SchemeParams, kernels: KernelPair, nm: NoiseModel | None,
                     rho0: Field, u0_coeffs: np.ndarray, pert_rho: Field,
                     pert_u: np.ndarray, eta: float, seed: int = 0) -> float:
    """Pathwise-uniqueness probe: sup_t state distance for an eta-perturbation
    of the initial data under identical noise."""
    base = run_path(params, kernels, nm, rho0, u0_coeffs, seed=seed,
                    store_density_series=True)
    rho0p = Field(rho0.grid, rho0.data + eta * pert_rho.data)
    u0p = u0_coeffs + eta * pert_u
    pert = run_path(params, kernels, nm, rho0p, u0p, seed=seed,
                    store_density_series=True)
    cell = rho0.grid.cell_volume
    worst = 0.0
    for r_a, r_b, v_a, v_b in zip(base.density_series, pert.density_series,
                                  base.velocity_series, pert.velocity_series):
        d_rho2 = float(np.sum((r_a - r_b) ** 2)) * cell
        d_u2 = float(np.sum((np.asarray(v_a) - np.asarray(v_b)) ** 2))
        worst = max(worst, math.sqrt(d_rho2 + d_u2))
    return worst
