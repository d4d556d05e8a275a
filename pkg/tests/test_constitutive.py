import math

import numpy as np
import pytest
from scipy.integrate import quad

from flockns.constitutive import (
    KernelPair,
    PositivityError,
    PressureLaw,
    ViscosityParams,
    cutoff_chi,
    kernel_preset,
    potential,
    potential_delta,
    potential_second_delta,
    pressure,
    pressure_delta,
    pressure_prime_delta,
    stress,
    stress_dissipation,
    validate_kernels,
    velocity_truncate,
)
from flockns.torus import Field, TorusGrid


GRID = TorusGrid(d=1, n=16)


def const_rho(value, grid=GRID):
    return Field(grid, np.full(grid.shape, float(value)))


class TestPressureLaw:
    def test_constructor_invariants(self):
        with pytest.raises(ValueError):
            PressureLaw(a=1.0, gamma=1.5)
        with pytest.raises(ValueError):
            PressureLaw(a=0.0, gamma=2.0)
        with pytest.raises(ValueError):
            PressureLaw(a=1.0, gamma=2.0, delta=-0.1)

    def test_big_gamma_is_never_capped(self):
        assert PressureLaw(a=1.0, gamma=2.0).Gamma == 6.0
        assert PressureLaw(a=1.0, gamma=7.5).Gamma == 7.5

    def test_vacuum_pressure_vanishes(self):
        law = PressureLaw(a=2.0, gamma=2.0, delta=0.3)
        assert np.all(pressure(const_rho(0.0), law).data == 0.0)
        assert np.all(pressure_delta(const_rho(0.0), law).data == 0.0)

    def test_direct_evaluation(self):
        law = PressureLaw(a=1.0, gamma=2.0, delta=0.1)
        assert np.allclose(pressure(const_rho(2.0), law).data, 4.0)
        # Gamma = 6: p_delta(2) = 4 + 0.1*(64 + 4)
        assert np.allclose(pressure_delta(const_rho(2.0), law).data, 10.8)

    def test_delta_zero_degenerates(self):
        law = PressureLaw(a=1.3, gamma=1.8, delta=0.0)
        rho = const_rho(1.7)
        assert np.array_equal(pressure_delta(rho, law).data, pressure(rho, law).data)

    def test_negative_density_names_index(self):
        law = PressureLaw(a=1.0, gamma=2.0)
        data = np.ones(GRID.shape)
        data[5] = -1e-6
        with pytest.raises(PositivityError) as err:
            pressure(Field(GRID, data), law)
        assert err.value.index == (5,)

    def test_roundoff_negatives_clamped(self):
        law = PressureLaw(a=1.0, gamma=2.0)
        data = np.ones(GRID.shape)
        data[3] = -5e-13
        out = pressure(Field(GRID, data), law)
        assert out.data[3] == 0.0


class TestPotential:
    def test_reference_density_zero(self):
        law = PressureLaw(a=1.0, gamma=2.0, delta=0.2)
        assert np.allclose(potential(const_rho(1.0), law).data, 0.0)
        assert np.allclose(potential_delta(const_rho(1.0), law).data, 0.0)

    def test_closed_form_example(self):
        law = PressureLaw(a=1.0, gamma=2.0)
        assert np.allclose(potential(const_rho(2.0), law).data, 2.0)

    def test_matches_quadrature(self):
        law = PressureLaw(a=0.7, gamma=1.9, delta=0.05)
        rng = np.random.default_rng(42)
        Gamma = law.Gamma

        def p_delta(s):
            return law.a * s**law.gamma + law.delta * (s**Gamma + s**2)

        for rho in rng.uniform(0.1, 3.0, size=12):
            val, _ = quad(lambda s: p_delta(s) / s**2, 1.0, rho, limit=200)
            closed = potential_delta(const_rho(rho), law).data[0]
            assert abs(closed - rho * val) < 1e-10

    def test_ode_identity_by_finite_differences(self):
        # rho * P'(rho) - P(rho) = p(rho)
        law = PressureLaw(a=1.4, gamma=2.3, delta=0.02)
        rng = np.random.default_rng(7)
        pts = rng.uniform(0.2, 4.0, size=100)
        eps = 1e-6
        for rho in pts:
            Pp = (
                potential_delta(const_rho(rho + eps), law).data[0]
                - potential_delta(const_rho(rho - eps), law).data[0]
            ) / (2 * eps)
            lhs = rho * Pp - potential_delta(const_rho(rho), law).data[0]
            p = pressure_delta(const_rho(rho), law).data[0]
            assert abs(lhs - p) < 1e-6 * max(abs(p), 1.0)

    def test_uniform_convexity_floor(self):
        law = PressureLaw(a=1.0, gamma=2.0, delta=0.1)
        rng = np.random.default_rng(3)
        for rho in rng.uniform(0.01, 5.0, size=50):
            assert potential_second_delta(const_rho(rho), law).data[0] >= 2 * law.delta

    def test_monotone_pressure(self):
        law = PressureLaw(a=1.0, gamma=1.7, delta=0.3)
        rng = np.random.default_rng(4)
        for rho in rng.uniform(0.01, 5.0, size=50):
            assert pressure_prime_delta(const_rho(rho), law).data[0] > 0


class TestStress:
    def test_zero_strain(self):
        grid = TorusGrid(d=2, n=8)
        visc = ViscosityParams(mu=1.0, lam=1.0)
        Du = Field(grid, np.zeros((2, 2) + grid.shape))
        assert np.all(stress(Du, visc).data == 0.0)
        assert np.all(stress_dissipation(Du, visc).data == 0.0)

    def test_one_dimensional_formula(self):
        visc = ViscosityParams(mu=1.0, lam=2.0 / 3.0)
        Du = Field(GRID, np.full((1, 1) + GRID.shape, 2.0))
        S = stress(Du, visc)
        assert np.allclose(S.data, 1.0 * 2.0 + (2.0 / 3.0 + 1.0) * 2.0)
        dis = stress_dissipation(Du, visc)
        assert np.allclose(dis.data, 1.0 * 4.0 + (2.0 / 3.0 + 1.0) * 4.0)

    def test_dissipation_nonnegative_on_random_tensors(self):
        grid = TorusGrid(d=2, n=8)
        visc = ViscosityParams(mu=0.7, lam=0.5)
        rng = np.random.default_rng(9)
        raw = rng.standard_normal((2, 2) + grid.shape)
        sym = 0.5 * (raw + np.swapaxes(raw, 0, 1))
        dis = stress_dissipation(Field(grid, sym), visc)
        assert dis.data.min() >= 0.0

    def test_viscosity_invariants(self):
        with pytest.raises(ValueError):
            ViscosityParams(mu=0.0, lam=1.0)
        with pytest.raises(ValueError):
            ViscosityParams(mu=1.0, lam=0.5)  # lambda - 2mu/3 < 0


class TestCutoff:
    def test_plateaus_exact(self):
        assert cutoff_chi(-0.5) == 1.0
        assert cutoff_chi(0.0) == 1.0
        assert cutoff_chi(1.0) == 0.0
        assert cutoff_chi(2.0) == 0.0

    def test_interior_monotone(self):
        v3, v7 = cutoff_chi(0.3), cutoff_chi(0.7)
        assert 0.0 < v7 < v3 < 1.0
        z = np.linspace(-1, 2, 301)
        vals = cutoff_chi(z)
        assert np.all(np.diff(vals) <= 1e-15)

    def test_array_shape_preserved(self):
        z = np.linspace(-1, 2, 7).reshape(7, 1)
        assert cutoff_chi(z).shape == (7, 1)


class TestVelocityTruncate:
    def test_identity_below_threshold(self):
        v = np.array([[0.3, 0.4]])
        out = velocity_truncate(v, R=1.0)
        assert np.array_equal(out, v)

    def test_zero_above_threshold(self):
        v = np.full((4, 2), 10.0)
        assert np.all(velocity_truncate(v, R=1.0) == 0.0)

    def test_transition_matches_scalar_cutoff(self):
        rng = np.random.default_rng(5)
        v = rng.standard_normal((6, 2))
        R = float(np.linalg.norm(v)) - 0.5
        out = velocity_truncate(v, R)
        assert np.allclose(out, cutoff_chi(0.5) * v, atol=1e-14)

    def test_never_increases_norm(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            v = rng.standard_normal(8) * rng.uniform(0.1, 5)
            out = velocity_truncate(v, R=1.0)
            assert np.linalg.norm(out) <= np.linalg.norm(v) + 1e-15


class TestKernels:
    def test_cosine_preset_passes(self):
        grid = TorusGrid(d=2, n=16)
        report = validate_kernels(kernel_preset(grid, "cosine"))
        assert report.passed
        psi = kernel_preset(grid, "cosine").psi
        assert psi.data.min() >= 0.0

    def test_odd_psi_fails_symmetry_and_sign(self):
        x = GRID.axis_coords()
        kp = KernelPair(
            K=Field(GRID, np.cos(math.pi * x)),
            psi=Field(GRID, np.sin(math.pi * x)),
        )
        report = validate_kernels(kp)
        assert not report.psi_nonnegative
        assert not report.psi_symmetric
        assert report.K_symmetric

    def test_white_noise_fails_smoothness(self):
        rng = np.random.default_rng(11)
        noise = rng.standard_normal(GRID.shape)
        noise = 0.5 * (noise + np.roll(noise[::-1], 1))  # symmetrize
        kp = KernelPair(K=Field(GRID, noise), psi=Field(GRID, np.ones(GRID.shape)))
        report = validate_kernels(kp)
        assert not report.K_smooth
        assert report.psi_smooth

    def test_zero_preset(self):
        kp = kernel_preset(GRID, "zero")
        assert np.all(kp.K.data == 0.0) and np.all(kp.psi.data == 0.0)
        assert validate_kernels(kp).passed

    def test_unknown_preset_rejected(self):
        with pytest.raises(ValueError):
            kernel_preset(GRID, "bogus")
