"""Grid, transforms, differentiation, norms, interpolation, dealiasing."""

import numpy as np
import pytest

from kdvgauge.spectral import (
    GridSizeError,
    SpectralState,
    dealias,
    derivative,
    edge_mass_fraction,
    interpolate,
    l2_norm,
    make_grid,
    mass,
    multiply,
    sobolev_norm,
)


class TestMakeGrid:
    def test_basic_sizing(self):
        g = make_grid(32 * np.pi, 1024)
        assert g.dx == pytest.approx(64 * np.pi / 1024)
        assert g.x[0] == pytest.approx(-32 * np.pi)
        assert g.dx * g.num_points == pytest.approx(2 * g.half_width)

    def test_smallest_legal_grid(self):
        g = make_grid(np.pi, 16)
        # integer wavenumbers -8..7 in fft order
        assert sorted(g.wavenumbers) == pytest.approx(list(range(-8, 8)))

    @pytest.mark.parametrize("n", [1000, 15, 0, -64])
    def test_rejects_bad_num_points(self, n):
        with pytest.raises(GridSizeError):
            make_grid(32 * np.pi, n)

    def test_rejects_bad_half_width(self):
        with pytest.raises(GridSizeError):
            make_grid(-1.0, 64)

    def test_wavenumbers_symmetric_except_nyquist(self):
        g = make_grid(2.0, 64)
        k = np.sort(g.wavenumbers)
        assert k[0] == pytest.approx(-g.k_max)
        body = k[1:]
        assert np.allclose(body, -body[::-1])

    def test_nodes_contain_origin(self):
        g = make_grid(7.3, 128)
        assert 0.0 in g.x


class TestDerivative:
    def test_single_mode(self):
        g = make_grid(np.pi, 64)
        st = SpectralState.from_physical(g, np.sin(g.x))
        d = derivative(st, 1)
        assert np.abs(d.physical() - np.cos(g.x)).max() < 1e-12

    def test_eigenfunction_third_order(self):
        g = make_grid(np.pi, 64)
        kmode = 5.0
        st = SpectralState.from_physical(g, np.exp(1j * kmode * g.x))
        d3 = derivative(st, 3)
        expected = (1j * kmode) ** 3 * np.exp(1j * kmode * g.x)
        assert np.abs(d3.physical() - expected).max() < 1e-10

    def test_constant_field(self):
        g = make_grid(np.pi, 32)
        st = SpectralState.from_physical(g, np.full(32, 4.2))
        for order in (1, 2, 3):
            assert np.abs(derivative(st, order).physical()).max() < 1e-13

    def test_composition_matches_second_order(self):
        g = make_grid(3.0, 128)
        rng = np.random.default_rng(0)
        st = dealias(SpectralState.from_physical(g, rng.standard_normal(128)))
        twice = derivative(derivative(st, 1), 1)
        once = derivative(st, 2)
        assert np.abs(twice.coefficients - once.coefficients).max() < 1e-12

    def test_real_field_stays_hermitian(self):
        g = make_grid(np.pi, 64)
        rng = np.random.default_rng(1)
        st = SpectralState.from_physical(g, rng.standard_normal(64))
        assert derivative(st, 1).check_hermitian()
        assert derivative(st, 3).check_hermitian()


class TestSobolevNorm:
    def test_sine_parseval(self):
        g = make_grid(np.pi, 64)
        st = SpectralState.from_physical(g, np.sin(g.x))
        assert sobolev_norm(st, 0.0) == pytest.approx(np.sqrt(np.pi), rel=1e-12)

    def test_sine_multiplier(self):
        g = make_grid(np.pi, 64)
        st = SpectralState.from_physical(g, np.sin(g.x))
        assert sobolev_norm(st, 1.0) == pytest.approx(
            np.sqrt(2.0) * np.sqrt(np.pi), rel=1e-12
        )

    def test_random_field_against_quadrature(self):
        # independent oracle: trapezoid quadrature of the samples
        g = make_grid(5.0, 256)
        rng = np.random.default_rng(2)
        vals = rng.standard_normal(256)
        st = SpectralState.from_physical(g, vals)
        quad = np.sqrt(np.sum(vals**2) * g.dx)
        assert sobolev_norm(st, 0.0) == pytest.approx(quad, rel=1e-10)

    def test_mass_is_zero_mode(self):
        g = make_grid(2.0, 64)
        st = SpectralState.from_physical(g, 3.0 + np.sin(np.pi * g.x / 2))
        assert mass(st) == pytest.approx(3.0 * 4.0, rel=1e-12)


class TestInterpolate:
    def test_band_limited_point(self):
        g = make_grid(np.pi, 64)
        st = SpectralState.from_physical(g, np.sin(g.x))
        assert abs(interpolate(st, 0.3) - np.sin(0.3)) < 1e-10

    def test_collocation(self):
        g = make_grid(4.0, 128)
        rng = np.random.default_rng(3)
        vals = rng.standard_normal(128)
        st = SpectralState.from_physical(g, vals)
        got = interpolate(st, g.x[17])
        assert got == pytest.approx(vals[17], abs=1e-12)

    def test_sech_squared_against_refined_grid(self):
        # oracle: re-sample the same function on a 4x finer grid
        g = make_grid(8 * np.pi, 256)
        fine = make_grid(8 * np.pi, 1024)
        st = SpectralState.from_physical(g, 1.0 / np.cosh(g.x) ** 2)
        ref = SpectralState.from_physical(fine, 1.0 / np.cosh(fine.x) ** 2)
        mid = g.x + g.dx / 2.0
        got = interpolate(st, mid)
        want = interpolate(ref, mid)
        assert np.abs(got - want).max() < 1e-8

    def test_periodic_folding(self):
        g = make_grid(np.pi, 64)
        st = SpectralState.from_physical(g, np.sin(g.x))
        assert interpolate(st, 0.3 + 2 * np.pi) == pytest.approx(
            np.sin(0.3), abs=1e-10
        )


class TestDealias:
    def test_low_modes_unchanged(self):
        g = make_grid(np.pi, 64)
        st = SpectralState.from_physical(g, np.sin(3 * g.x) + np.cos(5 * g.x))
        out = dealias(st)
        assert np.abs(out.coefficients - st.coefficients).max() < 1e-15

    def test_nyquist_mode_removed(self):
        g = make_grid(np.pi, 16)
        vals = np.cos(8 * g.x)
        st = SpectralState.from_physical(g, vals)
        out = dealias(st)
        assert np.abs(out.coefficients).max() < 1e-15

    def test_product_matches_zero_padding_oracle(self):
        # oracle: exact product spectrum from a doubled transform
        g = make_grid(np.pi, 64)
        rng = np.random.default_rng(4)
        mask_third = np.abs(g.wavenumbers) <= g.k_max / 3.0
        a = SpectralState(g, rng.standard_normal(64) * mask_third + 0j, True)
        a = SpectralState.from_physical(g, a.physical())
        b = SpectralState(g, rng.standard_normal(64) * mask_third + 0j, True)
        b = SpectralState.from_physical(g, b.physical())
        prod = multiply(a, b, dealias_result=True)

        fine = make_grid(np.pi, 128)
        av = interpolate(a, fine.x)
        bv = interpolate(b, fine.x)
        exact = SpectralState.from_physical(fine, av * bv)
        # truncate exact spectrum to the coarse retained band
        want = np.zeros(64, dtype=complex)
        want[:32] = exact.coefficients[:32]
        want[32:] = exact.coefficients[-32:]
        want[~g.dealias_mask] = 0.0
        assert np.abs(prod.coefficients - want).max() < 1e-13


class TestStateBookkeeping:
    def test_roundtrip_physical(self):
        g = make_grid(1.5, 64)
        rng = np.random.default_rng(5)
        vals = rng.standard_normal(64)
        st = SpectralState.from_physical(g, vals)
        assert np.abs(st.physical() - vals).max() < 1e-12 * np.abs(vals).max()

    def test_hermitian_check(self):
        g = make_grid(1.5, 64)
        st = SpectralState.from_physical(g, np.cos(np.pi * g.x / 1.5))
        assert st.check_hermitian()
        bad = st.copy()
        bad.coefficients[3] += 1.0
        assert not bad.check_hermitian()

    def test_edge_mass_localized_vs_wide(self):
        g = make_grid(10.0, 128)
        tight = SpectralState.from_physical(g, np.exp(-g.x**2))
        assert edge_mass_fraction(tight) < 1e-30
        flat = SpectralState.from_physical(g, np.ones(128))
        assert edge_mass_fraction(flat) == pytest.approx(0.1, abs=0.02)

    def test_l2_norm_alias(self):
        g = make_grid(np.pi, 32)
        st = SpectralState.from_physical(g, np.sin(g.x))
        assert l2_norm(st) == sobolev_norm(st, 0.0)
