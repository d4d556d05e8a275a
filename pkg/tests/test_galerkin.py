import math

import numpy as np
import pytest

from flockns.constitutive import KernelPair, PressureLaw, ViscosityParams, kernel_preset
from flockns.galerkin import (
    MassOperator,
    MassOperatorError,
    galerkin_rhs,
    mass_apply,
    mass_lipschitz_gap,
    mass_solve,
    max_dealiased_modes,
)
from flockns.torus import (
    Field,
    TorusGrid,
    coeffs_to_field,
    field_to_coeffs,
    mode_table,
)

GRID = TorusGrid(d=1, n=32)


def smooth_density(grid, seed, base=1.0, amp=0.3):
    rng = np.random.default_rng(seed)
    x = grid.coords()
    data = np.full(grid.shape, base)
    for k in (1, 2):
        for xi in x:
            data += amp / (2 * k * len(x)) * np.cos(k * math.pi * xi + rng.uniform(0, 2 * math.pi))
    return Field(grid, data)


def basis_samples(grid, m):
    """Analytic samples of the first m eigenfunctions (independent formula)."""
    tab = mode_table(grid)
    xs = grid.coords()
    root = math.sqrt(grid.measure)
    out = []
    for j in range(m):
        k = tab.kvecs[j]
        phase = sum(k[a] * xs[a] for a in range(grid.d)) * math.pi
        if tab.kind[j] == 0:
            out.append(np.full(grid.shape, 1.0 / root))
        elif tab.kind[j] == 1:
            out.append(np.cos(phase) * math.sqrt(2.0) / root)
        else:
            out.append(np.sin(phase) * math.sqrt(2.0) / root)
    return out


class TestMassOperator:
    def test_unit_density_is_identity(self):
        rho = Field(GRID, np.ones(GRID.shape))
        rng = np.random.default_rng(0)
        v = rng.standard_normal((12, 1))
        assert np.abs(mass_apply(rho, v) - v).max() < 1e-12

    def test_constant_density_scales(self):
        c = 2.5
        rho = Field(GRID, np.full(GRID.shape, c))
        rng = np.random.default_rng(1)
        v = rng.standard_normal(8)
        assert np.allclose(mass_apply(rho, v), c * v, atol=1e-12)
        assert np.allclose(mass_solve(rho, v), v / c, atol=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        rho = smooth_density(GRID, seed=3, base=1.2, amp=0.7)
        assert rho.data.min() > 0.5
        op = MassOperator(rho, m=16)
        v = rng.standard_normal((16, 1))
        back = op.solve(op.apply(v))
        assert np.linalg.norm(back - v) / np.linalg.norm(v) < 1e-10

    def test_gram_exactly_symmetric(self):
        rho = smooth_density(GRID, seed=4)
        op = MassOperator(rho, m=10)
        assert np.array_equal(op.gram, op.gram.T)

    def test_eigenvalue_floor(self):
        for seed in range(5):
            rho = smooth_density(GRID, seed=seed, base=1.0, amp=0.5)
            floor = float(rho.data.min())
            assert floor > 0
            op = MassOperator(rho, m=12)
            assert op.smallest_eigenvalue() >= 0.9 * floor

    def test_positivity_failure_reports_eigenvalue(self):
        rho = Field(GRID, np.full(GRID.shape, -1.0))
        with pytest.raises(MassOperatorError, match="eigenvalue"):
            MassOperator(rho, m=4)

    def test_floor_gate(self):
        rho = Field(GRID, np.full(GRID.shape, 1e-9))
        with pytest.raises(MassOperatorError, match="floor"):
            MassOperator(rho, m=4, rho_floor=1e-8)


class TestLipschitzGap:
    def test_identical_densities(self):
        rho = smooth_density(GRID, seed=5)
        rep = mass_lipschitz_gap(rho, rho, m=8)
        assert rep.gap == 0.0 and rep.ratio == 0.0

    def test_constant_density_closed_form(self):
        c1, c2 = 1.0, 2.0
        r1 = Field(GRID, np.full(GRID.shape, c1))
        r2 = Field(GRID, np.full(GRID.shape, c2))
        rep = mass_lipschitz_gap(r1, r2, m=6)
        assert abs(rep.gap - abs(1 / c1 - 1 / c2)) < 1e-12

    def test_two_scale_ratio_stability(self):
        base = smooth_density(GRID, seed=6, base=1.0, amp=0.4)
        x = GRID.axis_coords()
        pert = np.cos(2 * math.pi * x) + 0.5 * np.cos(math.pi * x)
        ratios = []
        for eta in (1e-2, 1e-3):
            r2 = Field(GRID, base.data + eta * pert)
            ratios.append(mass_lipschitz_gap(base, r2, m=8).ratio)
        assert ratios[0] <= 2 * ratios[1] and ratios[1] <= 2 * ratios[0]


class TestGalerkinRhs:
    LAW = PressureLaw(a=1.0, gamma=2.0, delta=0.1)
    VISC = ViscosityParams(mu=0.3, lam=0.4)

    def drift(self, rho, u_coeffs, kernels, eps=0.05, R=100.0):
        return galerkin_rhs(rho, u_coeffs, self.LAW, self.VISC, kernels, eps=eps, R=R)

    def test_homogeneous_rest_state(self):
        kernels = kernel_preset(GRID, "cosine")
        rho = Field(GRID, np.full(GRID.shape, 1.5))
        u = np.zeros((8, 1))
        terms = self.drift(rho, u, kernels)
        for name in ("advection", "pressure", "visc_reg", "stress", "attraction", "alignment"):
            assert np.abs(getattr(terms, name)).max() < 1e-12, name
        assert np.abs(terms.total).max() < 1e-12

    def test_uniform_velocity_alignment_equilibrium(self):
        kernels = kernel_preset(GRID, "zero")
        kernels = KernelPair(kernels.K, kernel_preset(GRID, "cosine").psi)
        rho = smooth_density(GRID, seed=7, base=1.0, amp=0.4)
        u = np.zeros((4, 1))
        u[0, 0] = 0.7  # constant mode only
        terms = self.drift(rho, u, kernels, eps=0.0)
        assert np.abs(terms.alignment).max() < 1e-12

    def test_cutoff_factor_plateau(self):
        kernels = kernel_preset(GRID, "cosine")
        rho = smooth_density(GRID, seed=8)
        rng = np.random.default_rng(9)
        u = 0.1 * rng.standard_normal((6, 1))
        below = self.drift(rho, u, kernels, R=10.0)
        assert below.cutoff_factor == 1.0
        above = self.drift(rho, u * 1e4, kernels, R=1.0)
        assert above.cutoff_factor == 0.0
        assert np.abs(above.advection).max() == 0.0
        assert np.abs(above.pressure).max() == 0.0

    def test_weak_form_direct_quadrature(self):
        """Every drift term against an independent double-sum/analytic oracle."""
        grid, m = GRID, 8
        x = grid.axis_coords()
        cell = grid.cell_volume
        rho_arr = 1.0 + 0.3 * np.cos(math.pi * x)
        u_arr = 0.2 * np.sin(math.pi * x)
        rho = Field(grid, rho_arr)
        u_coeffs = field_to_coeffs(Field(grid, u_arr[np.newaxis]), m)
        kernels = kernel_preset(grid, "cosine")
        terms = self.drift(rho, u_coeffs, kernels, eps=0.05, R=100.0)

        u_field = coeffs_to_field(grid, u_coeffs).data[0]
        tab = mode_table(grid)
        W = basis_samples(grid, m)

        def conv_direct(kernel_fn, values):
            out = np.zeros(grid.n)
            for i in range(grid.n):
                out[i] = np.sum(kernel_fn(x[i] - x) * values) * cell
            return out

        law, visc = self.LAW, self.VISC
        p_d = law.a * rho_arr**2 + law.delta * (rho_arr**6 + rho_arr**2)
        du = 0.2 * math.pi * np.cos(math.pi * x)  # analytic u'
        S = (visc.lam + 2 * visc.mu) * du
        gradK_rho = conv_direct(lambda z: -math.pi * np.sin(math.pi * z), rho_arr)
        psi_rho = conv_direct(lambda z: (1 + np.cos(math.pi * z)) / 2.0, rho_arr)
        psi_q = conv_direct(lambda z: (1 + np.cos(math.pi * z)) / 2.0, rho_arr * u_field)

        for j in range(m):
            w = W[j]
            k = tab.kvecs[j][0]
            if tab.kind[j] == 0:
                wprime = np.zeros(grid.n)
            elif tab.kind[j] == 1:
                wprime = -math.sqrt(2.0 / grid.measure) * math.pi * k * np.sin(math.pi * k * x)
            else:
                wprime = math.sqrt(2.0 / grid.measure) * math.pi * k * np.cos(math.pi * k * x)
            lam_j = (math.pi * k) ** 2

            oracle = {
                "advection": np.sum(rho_arr * u_field**2 * wprime) * cell,
                "pressure": np.sum(p_d * wprime) * cell,
                "visc_reg": -0.05 * lam_j * np.sum(rho_arr * u_field * w) * cell,
                "stress": -np.sum(S * wprime) * cell,
                "attraction": -np.sum(rho_arr * gradK_rho * w) * cell,
                "alignment": np.sum((rho_arr * psi_q - rho_arr * u_field * psi_rho) * w) * cell,
            }
            for name, expected in oracle.items():
                got = getattr(terms, name)[j, 0]
                assert abs(got - expected) < 1e-10, (name, j, got, expected)

    def test_alignment_pairing_identity(self):
        # <alignment drift, u> = -(1/2) double integral rho rho psi (u(y)-u(x))^2
        grid = TorusGrid(d=1, n=16)
        x = grid.axis_coords()
        cell = grid.cell_volume
        rng = np.random.default_rng(10)
        rho = Field(grid, 1.0 + 0.4 * np.cos(math.pi * x) + 0.2 * np.sin(2 * math.pi * x))
        m = 5
        u_coeffs = 0.3 * rng.standard_normal((m, 1))
        kernels = kernel_preset(grid, "cosine")
        terms = galerkin_rhs(rho, u_coeffs, self.LAW, self.VISC, kernels, eps=0.0, R=100.0)
        pairing = float(np.sum(terms.alignment * u_coeffs))

        u = coeffs_to_field(grid, u_coeffs).data[0]
        psi = kernels.psi.data
        double = 0.0
        for i in range(grid.n):
            for j in range(grid.n):
                idx = (i - j + grid.n // 2) % grid.n
                double += rho.data[i] * rho.data[j] * psi[idx] * (u[j] - u[i]) ** 2
        double *= cell**2
        assert abs(pairing + 0.5 * double) < 1e-8

    def test_output_projection_consistent(self):
        kernels = kernel_preset(GRID, "cosine")
        rho = smooth_density(GRID, seed=11)
        rng = np.random.default_rng(12)
        u = 0.2 * rng.standard_normal((7, 1))
        total = self.drift(rho, u, kernels).total
        back = field_to_coeffs(coeffs_to_field(GRID, total), 7)
        assert np.abs(back - total).max() < 1e-12

    def test_source_term_added(self):
        kernels = kernel_preset(GRID, "zero")
        rho = Field(GRID, np.ones(GRID.shape))
        u = np.zeros((4, 1))
        src = np.ones((4, 1))
        terms = galerkin_rhs(rho, u, self.LAW, self.VISC, kernels, eps=0.0, R=10.0, source=src)
        assert np.allclose(terms.total, src)

    def test_max_dealiased_modes(self):
        grid = TorusGrid(d=1, n=32)
        m_ok = max_dealiased_modes(grid)
        tab = mode_table(grid)
        assert np.all(np.abs(tab.kvecs[:m_ok]) <= grid.n // 3)
        assert np.any(np.abs(tab.kvecs[m_ok]) > grid.n // 3)
