import math

import numpy as np
import pytest

from flockns import torus
from flockns.torus import (
    Field,
    TorusGrid,
    coeffs_to_field,
    convolve,
    dealias,
    divergence,
    field_to_coeffs,
    from_spectral,
    gradient,
    inner,
    inv_laplacian,
    laplacian,
    lp_norm,
    mean,
    mode_capacity,
    mode_table,
    project_modes,
    reflect,
    sym_gradient,
    to_spectral,
    xm_norm,
)


def random_field(grid, seed, components=0, smooth=False):
    rng = np.random.default_rng(seed)
    shape = grid.shape if components == 0 else (components,) + grid.shape
    f = Field(grid, rng.standard_normal(shape))
    if smooth:
        f = dealias(f)
    return f


class TestTransforms:
    def test_constant_field_single_zero_mode(self):
        grid = TorusGrid(d=2, n=16)
        sf = to_spectral(Field(grid, np.full(grid.shape, 3.25)))
        assert abs(sf.coef[0, 0] - 3.25) < 1e-14
        rest = sf.coef.copy()
        rest[0, 0] = 0.0
        assert np.abs(rest).max() < 1e-14

    def test_pure_mode_two_conjugate_bins(self):
        grid = TorusGrid(d=1, n=16)
        x = grid.axis_coords()
        sf = to_spectral(Field(grid, np.sin(math.pi * x)))
        nonzero = np.flatnonzero(np.abs(sf.coef) > 1e-13)
        assert sorted(nonzero.tolist()) == [1, 15]  # k = +1 and k = -1
        assert abs(sf.coef[1] - (-0.5j)) < 1e-14
        assert abs(sf.coef[15] - sf.coef[1].conj()) < 1e-14
        assert sf.is_hermitian()

    @pytest.mark.parametrize("n", [8, 16, 32, 64])
    @pytest.mark.parametrize("d", [1, 2])
    def test_round_trip(self, d, n):
        if d == 2 and n > 32:
            pytest.skip("desk scale")
        grid = TorusGrid(d=d, n=n)
        f = random_field(grid, seed=n + d)
        back = from_spectral(to_spectral(f))
        rel = lp_norm(Field(grid, back.data - f.data), 2) / lp_norm(f, 2)
        assert rel < 1e-12

    def test_parseval(self):
        grid = TorusGrid(d=2, n=16)
        f = random_field(grid, seed=7)
        sf = to_spectral(f)
        spectral = grid.measure * np.sum(np.abs(sf.coef) ** 2)
        assert abs(spectral - lp_norm(f, 2) ** 2) < 1e-12 * lp_norm(f, 2) ** 2


class TestDerivatives:
    def test_gradient_of_constant_vanishes(self):
        grid = TorusGrid(d=2, n=8)
        g = gradient(Field(grid, np.full(grid.shape, 4.0)))
        assert np.abs(g.data).max() < 1e-14

    def test_laplacian_analytic(self):
        grid = TorusGrid(d=1, n=32)
        x = grid.axis_coords()
        f = Field(grid, np.sin(math.pi * x))
        err = laplacian(f).data + math.pi**2 * np.sin(math.pi * x)
        assert np.abs(err).max() < 1e-10

    def test_div_grad_is_laplacian(self):
        grid = TorusGrid(d=2, n=16)
        f = random_field(grid, seed=3)
        lhs = divergence(gradient(f)).data
        assert np.abs(lhs - laplacian(f).data).max() < 1e-12 * max(np.abs(lhs).max(), 1)

    def test_sym_gradient_symmetric_and_trace(self):
        grid = TorusGrid(d=2, n=16)
        v = random_field(grid, seed=5, components=2)
        Du = sym_gradient(v)
        assert np.abs(Du.data - np.swapaxes(Du.data, 0, 1)).max() < 1e-12
        trace = Du.data[0, 0] + Du.data[1, 1]
        assert np.abs(trace - divergence(v).data).max() < 1e-11


class TestConvolution:
    def test_constant_input(self):
        grid = TorusGrid(d=1, n=32)
        x = grid.axis_coords()
        K = Field(grid, np.cos(math.pi * x) + 2.0)
        c = 1.7
        out = convolve(Field(grid, np.full(grid.shape, c)), K)
        expected = c * mean(K)
        assert np.abs(out.data - expected).max() < 1e-12

    def test_gradient_kernel_on_constant(self):
        grid = TorusGrid(d=1, n=32)
        x = grid.axis_coords()
        gradK = gradient(Field(grid, np.cos(math.pi * x)))
        out = convolve(Field(grid, np.ones(grid.shape)), Field(grid, gradK.data[0]))
        assert np.abs(out.data).max() < 1e-12

    def test_matches_direct_quadrature(self):
        grid = TorusGrid(d=1, n=16)
        rng = np.random.default_rng(11)
        K = Field(grid, rng.standard_normal(grid.shape))
        f = Field(grid, rng.standard_normal(grid.shape))
        out = convolve(f, K)
        x = grid.axis_coords()
        direct = np.zeros(grid.n)
        for i in range(grid.n):
            for j in range(grid.n):
                dx = x[i] - x[j]
                idx = int(round((dx + 1.0) % 2.0 / (2.0 / grid.n))) % grid.n
                direct[i] += K.data[idx] * f.data[j]
        direct *= grid.cell_volume
        assert np.abs(out.data - direct).max() < 1e-12

    def test_self_adjoint_with_symmetric_kernel(self):
        grid = TorusGrid(d=1, n=32)
        x = grid.axis_coords()
        K = Field(grid, np.cos(math.pi * x) + 0.3 * np.cos(2 * math.pi * x))
        f = random_field(grid, seed=1)
        g = random_field(grid, seed=2)
        lhs = inner(convolve(f, K), g)
        rhs = inner(f, convolve(g, K))
        assert abs(lhs - rhs) < 1e-12 * max(abs(lhs), 1.0)

    def test_grid_mismatch_rejected(self):
        f = Field(TorusGrid(d=1, n=16), np.zeros(16))
        K = Field(TorusGrid(d=1, n=32), np.zeros(32))
        with pytest.raises(torus.GridMismatchError):
            convolve(f, K)


class TestModeProjection:
    def test_ordering_by_eigenvalue(self):
        grid = TorusGrid(d=2, n=16)
        tab = mode_table(grid)
        assert tab.kind[0] == 0  # constant first
        assert np.all(np.diff(tab.eigenvalues) >= -1e-12)
        assert mode_capacity(grid) == (grid.n - 1) ** 2 == len(tab.kind)

    def test_full_projection_is_identity(self):
        # identity on the span (the symmetric mode set excludes Nyquist bins)
        grid = TorusGrid(d=1, n=16)
        rng = np.random.default_rng(4)
        f = coeffs_to_field(grid, rng.standard_normal(mode_capacity(grid)))
        pf = project_modes(f, mode_capacity(grid))
        assert np.abs(pf.data - f.data).max() < 1e-12

    def test_high_mode_outside_span_projects_to_zero(self):
        grid = TorusGrid(d=1, n=32)
        x = grid.axis_coords()
        f = Field(grid, np.cos(7 * math.pi * x))
        pf = project_modes(f, 5)  # span covers |k| <= 2
        assert np.abs(pf.data).max() < 1e-12

    def test_idempotent_and_self_adjoint(self):
        grid = TorusGrid(d=2, n=8)
        m = 11
        f = random_field(grid, seed=8)
        g = random_field(grid, seed=9)
        pf = project_modes(f, m)
        assert np.abs(project_modes(pf, m).data - pf.data).max() < 1e-12
        assert abs(inner(pf, g) - inner(f, project_modes(g, m))) < 1e-12

    def test_contraction_on_random_fields(self):
        grid = TorusGrid(d=1, n=32)
        rng = np.random.default_rng(123)
        for _ in range(100):
            f = Field(grid, rng.standard_normal(grid.shape))
            m = int(rng.integers(1, mode_capacity(grid) + 1))
            assert lp_norm(project_modes(f, m), 2) <= lp_norm(f, 2) * (1 + 1e-12)

    def test_coefficients_round_trip_and_norm(self):
        grid = TorusGrid(d=2, n=16)
        m = 17
        v = random_field(grid, seed=10, components=2)
        coeffs = field_to_coeffs(v, m)
        assert coeffs.shape == (m, 2)
        back = coeffs_to_field(grid, coeffs)
        assert np.abs(back.data - project_modes(v, m).data).max() < 1e-12
        assert abs(xm_norm(coeffs) - lp_norm(back, 2)) < 1e-12

    def test_capacity_overflow_rejected(self):
        grid = TorusGrid(d=1, n=8)
        with pytest.raises(ValueError):
            project_modes(Field(grid, np.zeros(8)), mode_capacity(grid) + 1)


class TestInverseLaplacian:
    def test_constant_maps_to_zero(self):
        grid = TorusGrid(d=1, n=16)
        out = inv_laplacian(Field(grid, np.full(grid.shape, 2.0)))
        assert np.abs(out.data).max() < 1e-14

    def test_analytic_mode(self):
        grid = TorusGrid(d=1, n=32)
        x = grid.axis_coords()
        out = inv_laplacian(Field(grid, np.sin(math.pi * x)))
        assert np.abs(out.data + np.sin(math.pi * x) / math.pi**2).max() < 1e-10

    def test_inverse_identity_on_mean_zero(self):
        grid = TorusGrid(d=2, n=16)
        rng = np.random.default_rng(12)
        coeffs = rng.standard_normal(mode_capacity(grid))
        coeffs[0] = 0.0  # mean-zero
        f = coeffs_to_field(grid, coeffs)
        back = laplacian(inv_laplacian(f))
        assert lp_norm(Field(grid, back.data - f.data), 2) < 1e-10
        assert abs(mean(inv_laplacian(f))) < 1e-13


class TestMeansAndNorms:
    def test_mean_is_torus_integral(self):
        grid = TorusGrid(d=2, n=8)
        assert abs(mean(Field(grid, np.ones(grid.shape))) - 4.0) < 1e-14

    def test_odd_mode_integrates_to_zero(self):
        grid = TorusGrid(d=1, n=32)
        x = grid.axis_coords()
        assert abs(mean(Field(grid, np.sin(math.pi * x)))) < 1e-14

    def test_l2_matches_parseval(self):
        grid = TorusGrid(d=1, n=64)
        f = random_field(grid, seed=13)
        sf = to_spectral(f)
        parseval = math.sqrt(grid.measure * np.sum(np.abs(sf.coef) ** 2))
        assert abs(lp_norm(f, 2) - parseval) < 1e-12 * parseval

    def test_linf_and_l1(self):
        grid = TorusGrid(d=1, n=8)
        f = Field(grid, np.array([1.0, -3.0, 0.5, 0.0, 2.0, -1.0, 0.0, 0.25]))
        assert lp_norm(f, np.inf) == 3.0
        assert abs(lp_norm(f, 1) - np.sum(np.abs(f.data)) * grid.cell_volume) < 1e-14


class TestHelpers:
    def test_reflect_of_even_function_fixed(self):
        grid = TorusGrid(d=1, n=16)
        x = grid.axis_coords()
        f = Field(grid, np.cos(math.pi * x))
        assert np.abs(reflect(f).data - f.data).max() < 1e-14

    def test_reflect_of_odd_function_negates(self):
        grid = TorusGrid(d=2, n=8)
        X, Y = grid.coords()
        f = Field(grid, np.sin(math.pi * X) * np.cos(math.pi * Y))
        assert np.abs(reflect(f).data + f.data).max() < 1e-14

    def test_dealias_removes_high_modes(self):
        grid = TorusGrid(d=1, n=16)
        x = grid.axis_coords()
        f = Field(grid, np.cos(7 * math.pi * x) + np.cos(math.pi * x))
        out = dealias(f)
        assert np.abs(out.data - np.cos(math.pi * x)).max() < 1e-12

    def test_grid_invariants(self):
        with pytest.raises(ValueError):
            TorusGrid(d=1, n=7)
        with pytest.raises(ValueError):
            TorusGrid(d=4, n=8)
        grid = TorusGrid(d=3, n=8)
        assert abs(grid.cell_volume - (2 / 8) ** 3) < 1e-15
        assert grid.measure == 8.0
