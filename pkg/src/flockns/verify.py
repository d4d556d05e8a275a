"""Named invariant battery behind the `verify` command.

Each check exercises one certified operation on a small grid and returns a
pass/fail with a measured detail. The list is machine-readable; the exit
status of the CLI is zero iff every check passes. Heavier statistical and
refinement studies live in the acceptance test suite; this battery is sized
to finish in about a minute.
"""

from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass

import numpy as np

from . import constitutive as con
from . import diagnostics as diag
from . import galerkin as gal
from . import noise as noi
from . import particles as par
from . import torus
from .config import load_config
from .sinks import make_record, write_ndjson
from .stepper import SchemeParams, Stepper, run_ensemble, run_path
from .torus import Field, TorusGrid, coeffs_to_field, field_to_coeffs

__all__ = ["CheckResult", "run_all", "CHECKS"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _params(**kw):
    base = dict(d=1, n=64, m=9, h=0.01, T=0.05, eps=0.01, delta=0.01,
                R=1e6, a=1.0, gamma=2.0, mu=0.05, lam=0.05)
    base.update(kw)
    return SchemeParams(**base)


def _initial(params, rho_amp=0.2, u_amp=0.1):
    grid = params.grid
    x = grid.coords()[0]
    rho0 = Field(grid, 1.0 + rho_amp * np.cos(math.pi * x))
    u0 = field_to_coeffs(Field(grid, (u_amp * np.sin(math.pi * x))[np.newaxis]), params.m)
    return rho0, u0


# --- torus_field -------------------------------------------------------------

def check_spectral_round_trip():
    worst = 0.0
    for n in (8, 16, 32, 64):
        grid = TorusGrid(1, n)
        rng = np.random.default_rng(n)
        f = torus.coeffs_to_field(grid, rng.standard_normal(torus.mode_capacity(grid)))
        back = torus.from_spectral(torus.to_spectral(f))
        worst = max(worst, np.abs(back.data - f.data).max() / np.abs(f.data).max())
    return worst < 1e-12, f"max relative round-trip error {worst:.2e}"


def check_derivative_operators():
    grid = TorusGrid(1, 32)
    x = grid.axis_coords()
    f = Field(grid, np.sin(math.pi * x))
    e1 = np.abs(torus.laplacian(f).data + math.pi**2 * np.sin(math.pi * x)).max()
    g = torus.coeffs_to_field(grid, np.random.default_rng(0).standard_normal(21))
    e2 = np.abs(torus.divergence(torus.gradient(g)).data - torus.laplacian(g).data).max()
    grid2 = TorusGrid(2, 16)
    v = Field(grid2, np.random.default_rng(1).standard_normal((2,) + grid2.shape))
    Du = torus.sym_gradient(v)
    trace = Du.data[0, 0] + Du.data[1, 1]
    e3 = np.abs(trace - torus.divergence(v).data).max()
    ok = e1 < 1e-10 and e2 < 1e-10 and e3 < 1e-10
    return ok, f"laplacian analytic {e1:.2e}, div(grad)-lap {e2:.2e}, tr(Du)-div {e3:.2e}"


def check_convolve_direct_quadrature():
    grid = TorusGrid(1, 16)
    rng = np.random.default_rng(1)
    K = Field(grid, rng.standard_normal(grid.shape))
    f = Field(grid, rng.standard_normal(grid.shape))
    out = torus.convolve(f, K)
    x = grid.axis_coords()
    direct = np.zeros(grid.n)
    for i in range(grid.n):
        for j in range(grid.n):
            idx = (i - j + grid.n // 2) % grid.n
            direct[i] += K.data[idx] * f.data[j]
    err = np.abs(out.data - direct * grid.cell_volume).max()
    return err < 1e-10, f"circular-quadrature mismatch {err:.2e}"


def check_inv_laplacian():
    grid = TorusGrid(1, 32)
    x = grid.axis_coords()
    f = Field(grid, np.sin(math.pi * x))
    e1 = np.abs(torus.inv_laplacian(f).data + np.sin(math.pi * x) / math.pi**2).max()
    back = torus.laplacian(torus.inv_laplacian(f))
    e2 = torus.lp_norm(Field(grid, back.data - f.data), 2)
    return e1 < 1e-10 and e2 < 1e-10, f"analytic {e1:.2e}, inverse identity {e2:.2e}"


def check_mode_projection():
    grid = TorusGrid(1, 32)
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        f = Field(grid, rng.standard_normal(grid.shape))
        m = int(rng.integers(1, torus.mode_capacity(grid)))
        pf = torus.project_modes(f, m)
        worst = max(worst, torus.lp_norm(pf, 2) - torus.lp_norm(f, 2))
    f = Field(grid, rng.standard_normal(grid.shape))
    g = Field(grid, rng.standard_normal(grid.shape))
    adj = abs(torus.inner(torus.project_modes(f, 9), g)
              - torus.inner(f, torus.project_modes(g, 9)))
    idem = np.abs(torus.project_modes(torus.project_modes(f, 9), 9).data
                  - torus.project_modes(f, 9).data).max()
    ok = worst <= 1e-12 and adj < 1e-10 and idem < 1e-12
    return ok, f"contraction excess {worst:.1e}, adjointness {adj:.1e}, idempotence {idem:.1e}"


def check_mean_and_norms():
    grid = TorusGrid(2, 8)
    ones = Field(grid, np.ones(grid.shape))
    e1 = abs(torus.mean(ones) - 4.0)
    f = Field(TorusGrid(1, 64), np.random.default_rng(3).standard_normal(64))
    sf = torus.to_spectral(f)
    parseval = math.sqrt(f.grid.measure * float(np.sum(np.abs(sf.coef) ** 2)))
    e2 = abs(torus.lp_norm(f, 2) - parseval)
    return e1 < 1e-14 and e2 < 1e-10, f"measure {e1:.1e}, Parseval {e2:.1e}"


# --- constitutive -------------------------------------------------------------

def check_pressure_and_potential():
    grid = TorusGrid(1, 8)
    law = con.PressureLaw(a=1.0, gamma=2.0, delta=0.1)
    rho2 = Field(grid, np.full(grid.shape, 2.0))
    e1 = abs(con.pressure_delta(rho2, law).data[0] - 10.8)
    e2 = abs(con.potential(rho2, con.PressureLaw(a=1.0, gamma=2.0)).data[0] - 2.0)
    e3 = abs(con.potential(Field(grid, np.ones(grid.shape)), law).data[0])
    return max(e1, e2, e3) < 1e-12, f"p_delta(2) {e1:.1e}, P(2) {e2:.1e}, P(1) {e3:.1e}"


def check_potential_ode_identity():
    law = con.PressureLaw(a=1.3, gamma=2.2, delta=0.05)
    grid = TorusGrid(1, 4)
    rng = np.random.default_rng(4)
    worst = 0.0
    for rho in rng.uniform(0.2, 4.0, 100):
        fd = 1e-6
        up = con.potential_delta(Field(grid, np.full(grid.shape, rho + fd)), law).data[0]
        dn = con.potential_delta(Field(grid, np.full(grid.shape, rho - fd)), law).data[0]
        P = con.potential_delta(Field(grid, np.full(grid.shape, rho)), law).data[0]
        p = con.pressure_delta(Field(grid, np.full(grid.shape, rho)), law).data[0]
        worst = max(worst, abs(rho * (up - dn) / (2 * fd) - P - p) / max(abs(p), 1.0))
        psec = con.potential_second_delta(Field(grid, np.full(grid.shape, rho)), law).data[0]
        if psec < 2 * law.delta - 1e-12:
            return False, f"P'' = {psec} under the 2*delta floor at rho={rho}"
    return worst < 1e-6, f"rho P' - P = p relative error {worst:.2e}"


def check_stress_dissipation():
    grid = TorusGrid(2, 8)
    visc = con.ViscosityParams(mu=0.7, lam=0.5)
    rng = np.random.default_rng(5)
    raw = rng.standard_normal((2, 2) + grid.shape)
    Du = Field(grid, 0.5 * (raw + np.swapaxes(raw, 0, 1)))
    low = con.stress_dissipation(Du, visc).data.min()
    grid1 = TorusGrid(1, 8)
    visc1 = con.ViscosityParams(mu=1.0, lam=2.0 / 3.0)
    Du1 = Field(grid1, np.full((1, 1) + grid1.shape, 2.0))
    e_formula = abs(con.stress(Du1, visc1).data[0, 0, 0]
                    - (1.0 * 2.0 + (2.0 / 3.0 + 1.0) * 2.0))
    return low >= 0.0 and e_formula < 1e-14, (
        f"pointwise minimum {low:.2e}, 1-d formula error {e_formula:.1e}"
    )


def check_cutoff_plateaus():
    vals = (con.cutoff_chi(-0.5), con.cutoff_chi(2.0), con.cutoff_chi(0.3), con.cutoff_chi(0.7))
    ok = vals[0] == 1.0 and vals[1] == 0.0 and 0 < vals[3] < vals[2] < 1
    return ok, f"chi(-0.5)={vals[0]}, chi(2)={vals[1]}, chi(0.3)={vals[2]:.3f}"


def check_velocity_truncate():
    rng = np.random.default_rng(6)
    v = rng.standard_normal((6, 1))
    nv = float(np.linalg.norm(v))
    same = np.array_equal(con.velocity_truncate(v, R=2 * nv), v)
    zero = np.all(con.velocity_truncate(v, R=nv / 10) == 0.0) if nv > 10 else True
    mid = con.velocity_truncate(v, nv - 0.5)
    ok = same and np.allclose(mid, con.cutoff_chi(0.5) * v, atol=1e-14)
    return ok, "plateau exactness and transition scaling"


def check_kernel_validation():
    grid = TorusGrid(1, 16)
    good = con.validate_kernels(con.kernel_preset(grid, "cosine")).passed
    x = grid.axis_coords()
    bad = con.validate_kernels(
        con.KernelPair(Field(grid, np.cos(math.pi * x)), Field(grid, np.sin(math.pi * x)))
    )
    return good and not bad.psi_nonnegative and not bad.psi_symmetric, (
        f"preset passes; odd psi flagged (min {bad.psi_min:.2f})"
    )


# --- noise ---------------------------------------------------------------------

def check_wiener_increment_stats():
    M, h = 10_000, 0.01
    samples = np.array([
        noi.WienerPath(seed=7, k_max=2, h=h, n_steps=1, path_index=i).increments(0)
        for i in range(M)
    ])
    var = samples[:, 0].var()
    corr = abs(np.corrcoef(samples[:, 0], samples[:, 1])[0, 1])
    again = noi.WienerPath(seed=7, k_max=2, h=h, n_steps=1, path_index=5).increments(0)
    det = np.array_equal(again, samples[5])
    ok = 0.0093 <= var <= 0.0107 and corr < 0.05 and det
    return ok, f"var {var:.5f} (CI [0.0093, 0.0107]), |corr| {corr:.3f}, deterministic {det}"


def check_ito_isometry():
    k_max, h, n_steps, M = 4, 0.01, 16, 1000
    rng = np.random.default_rng(8)
    H = rng.standard_normal(k_max)
    sums = np.array([
        float(np.sum(noi.WienerPath(seed=9, k_max=k_max, h=h, n_steps=n_steps,
                                    path_index=i).table() * H))
        for i in range(M)
    ])
    predicted = n_steps * h * float(np.sum(H**2))
    stderr = predicted * math.sqrt(2.0 / (M - 1))
    err = abs(sums.var() - predicted)
    return err <= 4 * stderr, f"|var - predicted| = {err:.2e} vs 4 SE = {4 * stderr:.2e}"


def check_coefficient_G_bound():
    grid = TorusGrid(2, 16)
    nm = noi.NoiseModel.default(grid, k_max=6, g0=0.4)
    rng = np.random.default_rng(10)
    rho = Field(grid, rng.uniform(0.0, 2.0, grid.shape))
    q = Field(grid, rng.standard_normal((2,) + grid.shape))
    worst = -np.inf
    for k in range(1, 7):
        G = noi.coefficient_G(k, rho, q, nm)
        mag = np.sqrt(np.sum(G.data**2, axis=0))
        bound = nm.g[k - 1] * (rho.data + np.sqrt(np.sum(q.data**2, axis=0)))
        worst = max(worst, float((mag - bound).max()))
    return worst <= 1e-12, f"max excess over g_k(rho + |q|): {worst:.2e}"


def check_coefficient_F_bounds():
    grid = TorusGrid(1, 32)
    nm = noi.NoiseModel.default(grid, k_max=4, g0=0.7)
    rng = np.random.default_rng(11)
    rho = Field(grid, rng.uniform(0.0, 2.0, grid.shape))
    u = Field(grid, 3.0 * rng.standard_normal((1,) + grid.shape))
    worst = -np.inf
    for eps in (0.1, 0.01):
        for k in range(1, 5):
            F = noi.coefficient_F_eps(k, rho, u, eps, nm)
            ratio = np.sqrt(np.sum(F.data**2, axis=0)) / (1.0 + np.abs(u.data[0]))
            worst = max(worst, float(ratio.max()) - nm.g[k - 1])
    dead = noi.coefficient_F_eps(1, Field(grid, np.full(grid.shape, 0.025)), u, 0.1, nm)
    ok = worst <= 1e-12 and np.all(dead.data == 0.0)
    return ok, f"eps-uniform excess {worst:.2e}; density plateau kills F {np.all(dead.data == 0)}"


def check_momentum_noise_increment():
    grid = TorusGrid(1, 32)
    nm = noi.NoiseModel.default(grid, k_max=3, g0=0.3)
    rho = Field(grid, np.ones(grid.shape))
    rng = np.random.default_rng(12)
    u0 = 0.1 * rng.standard_normal((7, 1))
    dW1, dW2 = rng.standard_normal(3), rng.standard_normal(3)
    lhs = noi.momentum_noise_increment(rho, u0, 0.3 * dW1 - 0.7 * dW2, 0.1, nm, 7)
    rhs = 0.3 * noi.momentum_noise_increment(rho, u0, dW1, 0.1, nm, 7) - (
        0.7 * noi.momentum_noise_increment(rho, u0, dW2, 0.1, nm, 7))
    err = np.abs(lhs - rhs).max()
    zero = np.all(noi.momentum_noise_increment(rho, u0, np.zeros(3), 0.1, nm, 7) == 0.0)
    return err < 1e-12 and zero, f"linearity error {err:.2e}, zero map {zero}"


# --- galerkin_core ---------------------------------------------------------------

def check_mass_operator():
    grid = TorusGrid(1, 32)
    rng = np.random.default_rng(13)
    v = rng.standard_normal((12, 1))
    e1 = np.abs(gal.mass_apply(Field(grid, np.ones(grid.shape)), v) - v).max()
    x = grid.axis_coords()
    rho = Field(grid, 1.2 + 0.6 * np.cos(math.pi * x))
    op = gal.MassOperator(rho, 12)
    e2 = np.linalg.norm(op.solve(op.apply(v)) - v) / np.linalg.norm(v)
    return e1 < 1e-12 and e2 < 1e-10, f"identity {e1:.1e}, round trip {e2:.1e}"


def check_mass_lipschitz():
    grid = TorusGrid(1, 32)
    x = grid.axis_coords()
    base = Field(grid, 1.0 + 0.4 * np.cos(math.pi * x))
    pert = np.cos(2 * math.pi * x)
    ratios = []
    for eta in (1e-3, 1e-4, 1e-5):
        rho2 = Field(grid, base.data + eta * pert)
        ratios.append(gal.mass_lipschitz_gap(base, rho2, m=8).ratio)
    spread = max(ratios) / min(ratios)
    return spread < 2.0, f"ratio spread over eta in 1e-3..1e-5: {spread:.3f}"


def check_galerkin_rhs_structure():
    grid = TorusGrid(1, 32)
    law = con.PressureLaw(a=1.0, gamma=2.0, delta=0.1)
    visc = con.ViscosityParams(mu=0.3, lam=0.4)
    kernels = con.kernel_preset(grid, "cosine")
    rest = gal.galerkin_rhs(Field(grid, np.full(grid.shape, 1.5)), np.zeros((8, 1)),
                            law, visc, kernels, eps=0.05, R=100.0)
    e1 = np.abs(rest.total).max()
    x = grid.axis_coords()
    rho = Field(grid, 1.0 + 0.4 * np.cos(math.pi * x))
    u = np.zeros((4, 1))
    u[0, 0] = 0.7
    align = gal.galerkin_rhs(rho, u, law, visc, con.kernel_preset(grid, "cosine"),
                             eps=0.0, R=100.0).alignment
    e2 = np.abs(align).max()
    return e1 < 1e-12 and e2 < 1e-12, f"rest drift {e1:.1e}, uniform-u alignment {e2:.1e}"


def check_alignment_pairing():
    grid = TorusGrid(1, 16)
    law = con.PressureLaw(a=1.0, gamma=2.0)
    visc = con.ViscosityParams(mu=0.3, lam=0.4)
    kernels = con.kernel_preset(grid, "cosine")
    x = grid.axis_coords()
    rho = Field(grid, 1.0 + 0.4 * np.cos(math.pi * x))
    rng = np.random.default_rng(14)
    u_coeffs = 0.3 * rng.standard_normal((5, 1))
    terms = gal.galerkin_rhs(rho, u_coeffs, law, visc, kernels, eps=0.0, R=100.0)
    pairing = float(np.sum(terms.alignment * u_coeffs))
    double = diag.alignment_double_sum(rho, coeffs_to_field(grid, u_coeffs), kernels.psi)
    err = abs(pairing + double)
    return err < 1e-8, f"<alignment, u> + half double sum = {err:.2e}"


# --- stepper ----------------------------------------------------------------------

def check_density_substep():
    params = _params(eps=0.05, sub_steps=4)
    grid = params.grid
    x = grid.axis_coords()
    rho0 = Field(grid, 2.0 + np.cos(3 * math.pi * x))
    stepper = Stepper(params, con.kernel_preset(grid, "zero"))
    rhos, _, _ = stepper.density_substep(rho0, np.zeros((params.m, 1)), params.h)
    factor = math.exp(-params.eps * (3 * math.pi) ** 2 * params.h)
    e1 = np.abs(rhos[-1].data - (2.0 + factor * np.cos(3 * math.pi * x))).max()
    rho1, u1 = _initial(params, rho_amp=0.4, u_amp=0.3)
    rhos, _, _ = stepper.density_substep(rho1, u1, params.h)
    e2 = abs(float(np.sum(rhos[-1].data - rho1.data)) * grid.cell_volume)
    return e1 < 1e-10 and e2 < 1e-12, f"heat kernel {e1:.1e}, step mass drift {e2:.1e}"


def check_momentum_update():
    params = _params(drift_off=True, eps=0.1)
    grid = params.grid
    nm = noi.NoiseModel.default(grid, k_max=4, g0=0.3)
    rho0 = Field(grid, np.ones(grid.shape))
    u0 = np.zeros((params.m, 1))
    u0[0, 0] = 0.3
    stepper = Stepper(params, con.kernel_preset(grid, "zero"), nm)
    from .stepper import GalerkinState

    state = GalerkinState(rho0, u0, 0.0)
    rhos, _, _ = stepper.density_substep(rho0, u0, params.h)
    rng = np.random.default_rng(15)
    dW = rng.standard_normal(4) * math.sqrt(params.h)
    u_new, *_ = stepper.momentum_update(state, rhos, dW, params.h)
    expected = noi.momentum_noise_increment(rho0, u0, dW, params.eps, nm, params.m)
    err = np.abs((u_new - u0) - expected).max()
    return err < 1e-12, f"noise-only composition error {err:.2e}"


def check_run_determinism():
    params = _params(T=0.03)
    grid = params.grid
    nm = noi.NoiseModel.default(grid, k_max=4, g0=0.2)
    kernels = con.kernel_preset(grid, "cosine")
    rho0, u0 = _initial(params)
    t1 = run_path(params, kernels, nm, rho0, u0, seed=21)
    t2 = run_path(params, kernels, nm, rho0, u0, seed=21)
    same = t1.mass == t2.mass and all(
        np.array_equal(a, b) for a, b in zip(t1.velocity_series, t2.velocity_series)
    )
    return same, "bit-identical repeat run"


def check_cutoff_plateau():
    kernels = con.kernel_preset(_params().grid, "cosine")
    rho0, u0 = _initial(_params())
    t_big = run_path(_params(R=1e6, T=0.03), kernels, None, rho0, u0)
    t_mid = run_path(_params(R=50.0, T=0.03), kernels, None, rho0, u0)
    same = all(np.array_equal(a, b)
               for a, b in zip(t_big.velocity_series, t_mid.velocity_series))
    return same, "trajectory independent of R while ||u|| <= R"


def check_run_sweep():
    from .stepper import run_sweep

    params = _params(T=0.02)
    grid = params.grid
    nm = noi.NoiseModel.default(grid, k_max=2, g0=0.2)
    rho0, u0 = _initial(params)
    rep = run_sweep(params, "eps", [0.02, 0.01], con.kernel_preset(grid, "cosine"),
                    nm, rho0, u0, seed=20)
    evf = diag.evf_gaps(rep.values, rep.trajectories)
    ok = (len(rep.rho_gaps) == 1 and np.all(np.isfinite(rep.rho_gaps))
          and len(evf.gaps) == 1 and np.isfinite(evf.gaps[0]))
    return ok, f"shared-noise gap {rep.rho_gaps[0]:.2e}, log-mass gap {evf.gaps[0]:.2e}"


def check_run_mass_conservation():
    rng = np.random.default_rng(22)
    worst = 0.0
    for trial in range(4):
        d = 1 if trial < 3 else 2
        n = int(rng.choice([16, 32])) if d == 1 else 16
        params = SchemeParams(
            d=d, n=n, m=5, h=0.01, T=0.03,
            eps=float(rng.uniform(0.005, 0.03)), delta=float(rng.uniform(0.0, 0.05)),
            a=float(rng.uniform(0.5, 1.5)), gamma=float(rng.uniform(1.6, 2.5)),
            mu=0.05, lam=0.05,
        )
        grid = params.grid
        nm = noi.NoiseModel.default(grid, k_max=3, g0=0.2)
        cfg_rho = 1.0 + 0.2 * np.cos(math.pi * grid.coords()[0])
        rho0 = Field(grid, cfg_rho)
        u0 = np.zeros((params.m, d))
        traj = run_path(params, con.kernel_preset(grid, "cosine"), nm, rho0, u0,
                        seed=trial)
        worst = max(worst, diag.mass_residual(traj))
    return worst < 1e-10, f"max mass residual over 4 random configs {worst:.2e}"


# --- diagnostics --------------------------------------------------------------------

def check_energy_rest_state():
    params = _params()
    grid = params.grid
    rho0 = Field(grid, np.full(grid.shape, 1.5))
    traj = run_path(params, con.kernel_preset(grid, "cosine"), None, rho0,
                    np.zeros((params.m, 1)))
    rep = diag.energy_report(traj, params.T)
    worst = max(abs(v) for v in rep.dissipation_terms().values())
    return abs(rep.residual) < 1e-12 and worst < 1e-13, (
        f"residual {rep.residual:.1e}, max dissipation {worst:.1e}"
    )


def check_energy_refinement():
    residuals = []
    for h in (0.02, 0.01):
        params = _params(h=h, T=0.1, eps=0.02, delta=0.02)
        rho0, u0 = _initial(params)
        traj = run_path(params, con.kernel_preset(params.grid, "zero"), None, rho0, u0)
        residuals.append(abs(diag.energy_report(traj, 0.1).residual))
    ratio = residuals[0] / residuals[1]
    return ratio >= 1.5, f"residual ratio per h halving {ratio:.2f}"


def check_alignment_double_sum():
    grid = TorusGrid(1, 8)
    rng = np.random.default_rng(16)
    rho = Field(grid, rng.uniform(0.2, 2.0, grid.shape))
    u = Field(grid, rng.standard_normal((1,) + grid.shape))
    psi = con.kernel_preset(grid, "cosine").psi
    a = diag.alignment_dissipation(rho, u, psi)
    b = diag.alignment_double_sum(rho, u, psi)
    return abs(a - b) < 1e-12 * max(abs(b), 1.0), f"identity gap {abs(a - b):.2e}"


def check_moment_scaling_brownian():
    params = SchemeParams(d=1, n=32, m=5, h=0.005, T=0.08, eps=0.1, delta=0.0,
                          mu=0.05, lam=0.05, drift_off=True)
    grid = params.grid
    nm = noi.NoiseModel.default(grid, k_max=2, g0=0.4)
    rho0 = Field(grid, np.ones(grid.shape))
    stats = run_ensemble(params, con.kernel_preset(grid, "zero"), nm, rho0,
                         np.zeros((params.m, 1)), n_paths=64, root_seed=17, threads=4)
    series = [np.stack(t.momentum_series) for t in stats.trajectories]
    rep = diag.moment_scaling(series, stats.times, 2, [0.01, 0.02, 0.04, 0.08])
    return abs(rep.slope - 1.0) <= 0.15, f"Brownian r=2 slope {rep.slope:.3f}"


def check_pressure_identity_rest():
    params = _params(T=0.04)
    grid = params.grid
    c = 1.5
    traj = run_path(params, con.kernel_preset(grid, "cosine"), None,
                    Field(grid, np.full(grid.shape, c)), np.zeros((params.m, 1)),
                    track_identity=True)
    law = params.law
    expected = (law.a * c**law.gamma + law.delta * (c**law.Gamma + c**2)) * c * grid.measure * params.T
    e1 = abs(traj.identity.lhs - expected) / expected
    e2 = abs(traj.identity.defect) / expected
    return e1 < 1e-10 and e2 < 1e-10, f"lhs error {e1:.1e}, defect {e2:.1e}"


def check_renormalized_toolbox():
    params = _params()
    rho0, u0 = _initial(params, rho_amp=0.3, u_amp=0.2)
    traj = run_path(params, con.kernel_preset(params.grid, "cosine"), None, rho0, u0,
                    store_density_series=True)
    _, defects = diag.renormalized_defect(traj, "linear")
    e1 = np.abs(defects).max()
    rng = np.random.default_rng(18)
    worst = 0.0
    k = 2.0
    for z in rng.uniform(0.05, 5 * k, 100):
        fd = 1e-6
        if abs(z - k) < 10 * fd:
            continue
        Lp = (diag.truncation_L_k(z + fd, k) - diag.truncation_L_k(z - fd, k)) / (2 * fd)
        lhs = z * Lp - diag.truncation_L_k(z, k)
        worst = max(worst, abs(lhs - diag.truncation_T_k(z, k)) / max(abs(lhs), 1.0))
    return e1 < 1e-12 and worst < 1e-6, (
        f"linear-entropy defect {e1:.1e}, zL'-L=T relative error {worst:.2e}"
    )


def check_evf_closed_form():
    grid = TorusGrid(2, 8)
    c = 1.7
    val = diag.rho_log_rho_integral(Field(grid, np.full(grid.shape, c)))
    err = abs(val - c * math.log(c) * grid.measure)
    return err < 1e-12, f"constant-state log mass error {err:.2e}"


def check_truncation_plateaus():
    ok = (
        diag.truncation_T_k(1.0, 2.0) == 1.0
        and diag.truncation_T_k(20.0, 2.0) == 4.0
        and diag.truncation_T(1.0) == 1.0
        and diag.truncation_T(3.0) == 2.0
    )
    return ok, "T_k linear region and plateau exact"


# --- particle_reference ---------------------------------------------------------------

def check_particle_two_body():
    psi = lambda disp: np.ones(disp.shape[:-1])
    gradK = lambda disp: np.zeros_like(disp)
    h, nsteps = 0.05, 40
    ps = par.ParticleState(np.array([[-0.5], [0.4]]), np.array([[1.0], [-0.5]]))
    w0 = ps.velocities[0, 0] - ps.velocities[1, 0]
    for _ in range(nsteps):
        ps = par.particle_step(ps, h, psi, gradK)
    w = ps.velocities[0, 0] - ps.velocities[1, 0]
    err = abs(w - w0 * (1.0 - h + h**2 / 2.0) ** nsteps)
    return err < 1e-8, f"contraction-rate error {err:.2e}"


def check_particle_conservation():
    psi, gradK = par.particle_kernels("cosine")
    rng = np.random.default_rng(19)
    ps = par.ParticleState(rng.uniform(-1, 1, (24, 1)), 0.5 * rng.standard_normal((24, 1)))
    _, variance, momentum = par.run_particles(ps, 0.02, 25, psi, gradK)
    e1 = np.abs(momentum - momentum[0]).max()
    psi0, gradK0 = par.particle_kernels("cosine", K_scale=0.0)
    _, variance, _ = par.run_particles(ps, 0.02, 25, psi0, gradK0)
    mono = np.all(np.diff(variance) <= 1e-12)
    return e1 < 1e-10 and mono, f"momentum drift {e1:.1e}, variance monotone {mono}"


def check_empirical_fields():
    grid = TorusGrid(1, 32)
    N = 32
    xs = (-1.0 + 2.0 * np.arange(N) / N).reshape(-1, 1)
    ps = par.ParticleState(xs, np.full((N, 1), 0.7))
    rho, _ = par.empirical_fields(ps, grid, bandwidth=4 * (2.0 / grid.n),
                                  particle_mass=grid.measure / N)
    e1 = abs(torus.mean(rho) - grid.measure)
    e2 = np.abs(rho.data - 1.0).max()
    return e1 < 1e-12 and e2 < 0.01, f"mass exactness {e1:.1e}, lattice flatness {e2:.4f}"


# --- harness ---------------------------------------------------------------------------

def check_config_hash():
    cfg = load_config()
    reordered = load_config({"scheme": {"h": 0.01}})  # same value, explicit
    changed = load_config({"scheme": {"h": 0.005}})
    moved = load_config({"outputs": {"dir": "elsewhere"}})
    ok = (
        cfg.config_hash == reordered.config_hash == moved.config_hash
        and cfg.config_hash != changed.config_hash
    )
    return ok, "hash invariant to layout/out-dir, sensitive to semantics"


def check_sink_byte_stability():
    import os

    recs = [make_record("demo", {"x": 0.1 + 0.2, "arr": np.arange(3)}, "h", 1)]
    with tempfile.TemporaryDirectory() as tmp:
        p1, p2 = os.path.join(tmp, "a.ndjson"), os.path.join(tmp, "b.ndjson")
        write_ndjson(p1, recs)
        write_ndjson(p2, recs)
        same = open(p1, "rb").read() == open(p2, "rb").read()
    return same, "re-serialization is byte-stable"


CHECKS = {
    "torus_field.to_from_spectral": check_spectral_round_trip,
    "torus_field.derivatives": check_derivative_operators,
    "torus_field.convolve": check_convolve_direct_quadrature,
    "torus_field.inv_laplacian": check_inv_laplacian,
    "torus_field.project_modes": check_mode_projection,
    "torus_field.mean_lp_norm": check_mean_and_norms,
    "constitutive.pressure_potential": check_pressure_and_potential,
    "constitutive.potential_ode": check_potential_ode_identity,
    "constitutive.stress_dissipation": check_stress_dissipation,
    "constitutive.cutoff_chi": check_cutoff_plateaus,
    "constitutive.velocity_truncate": check_velocity_truncate,
    "constitutive.validate_kernels": check_kernel_validation,
    "noise.wiener_increments": check_wiener_increment_stats,
    "noise.ito_isometry": check_ito_isometry,
    "noise.coefficient_G": check_coefficient_G_bound,
    "noise.coefficient_F_eps": check_coefficient_F_bounds,
    "noise.momentum_noise_increment": check_momentum_noise_increment,
    "galerkin_core.mass_operator": check_mass_operator,
    "galerkin_core.mass_lipschitz_gap": check_mass_lipschitz,
    "galerkin_core.galerkin_rhs": check_galerkin_rhs_structure,
    "galerkin_core.alignment_pairing": check_alignment_pairing,
    "stepper.density_substep": check_density_substep,
    "stepper.momentum_update": check_momentum_update,
    "stepper.run_determinism": check_run_determinism,
    "stepper.cutoff_plateau": check_cutoff_plateau,
    "stepper.mass_conservation": check_run_mass_conservation,
    "stepper.run_sweep": check_run_sweep,
    "diagnostics.energy_report_rest": check_energy_rest_state,
    "diagnostics.energy_refinement": check_energy_refinement,
    "diagnostics.alignment_dissipation": check_alignment_double_sum,
    "diagnostics.moment_scaling": check_moment_scaling_brownian,
    "diagnostics.pressure_identity": check_pressure_identity_rest,
    "diagnostics.renormalized_defect": check_renormalized_toolbox,
    "diagnostics.evf_defect": check_evf_closed_form,
    "diagnostics.truncation_T_L": check_truncation_plateaus,
    "particle_reference.particle_step": check_particle_two_body,
    "particle_reference.conservation": check_particle_conservation,
    "particle_reference.empirical_fields": check_empirical_fields,
    "harness.config_hash": check_config_hash,
    "harness.output_sinks": check_sink_byte_stability,
}


def run_all(names=None) -> list:
    """Execute the battery (or a named subset); never raises."""
    results = []
    for name, fn in CHECKS.items():
        if names and name not in names:
            continue
        try:
            passed, detail = fn()
        except Exception as err:  # a crash is a failure with the error as detail
            passed, detail = False, f"raised {type(err).__name__}: {err}"
        results.append(CheckResult(name=name, passed=bool(passed), detail=detail))
    return results
