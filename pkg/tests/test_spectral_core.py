import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgdisp.errors import ConfigurationError, DataError
from qgdisp.spectral_core import (
    BallProjection,
    BandCutoff,
    DispersivePhase,
    FractionalLaplacian,
    Grid,
    Hilbert1D,
    LinearPropagator,
    Riesz,
    SpectralField,
    apply_symbol,
    dealias,
    dealiased_product,
    inner_product,
    padded_physical,
    perp_velocity,
    random_field,
    smooth_cutoff,
)

TWO_PI = 2 * math.pi


def unit_grid(n=32):
    return Grid(n, TWO_PI)


def field_of(grid, fn):
    x1, x2 = grid.coords
    return SpectralField.from_physical(grid, fn(x1, x2))


class TestGrid:
    def test_lattice_n8(self):
        g = Grid(8, TWO_PI)
        assert sorted(g.wavenumbers.tolist()) == list(range(-4, 4))
        assert np.allclose(sorted(set(g.xi1.ravel().tolist())), range(-4, 4))

    @pytest.mark.parametrize("n", [7, 4, 12, 0, -8])
    def test_rejects_bad_size(self, n):
        with pytest.raises(ConfigurationError, match="power of two"):
            Grid(n, TWO_PI)

    @pytest.mark.parametrize("length", [0.0, -1.0, float("nan")])
    def test_rejects_bad_length(self, length):
        with pytest.raises(ConfigurationError, match="box length"):
            Grid(16, length)

    def test_default_box_spacing(self):
        g = Grid(256, 32 * math.pi)
        nonzero = g.xi_abs[g.xi_abs > 0]
        assert nonzero.min() == pytest.approx(1 / 16, rel=1e-15)

    def test_zero_frequency_once_per_axis(self):
        g = Grid(64, 3.0)
        assert np.count_nonzero(g.wavenumbers == 0) == 1


class TestTransform:
    def test_cosine_has_two_coefficients(self):
        g = unit_grid(16)
        f = field_of(g, lambda x1, x2: np.cos(x1))
        nz = np.argwhere(np.abs(f.coeffs) > 1e-14)
        assert {(g.k1[i, j], g.k2[i, j]) for i, j in nz} == {(1, 0), (-1, 0)}
        assert abs(f.coeffs[1, 0]) == pytest.approx(abs(f.coeffs[-1, 0]))

    def test_constant_only_mean(self):
        g = unit_grid(16)
        f = SpectralField.from_physical(g, np.full(g.shape, 3.5))
        assert f.coeffs[0, 0] == pytest.approx(3.5)
        rest = np.abs(f.coeffs).copy()
        rest[0, 0] = 0
        assert rest.max() < 1e-15

    @pytest.mark.parametrize("seed", range(5))
    def test_roundtrip(self, seed):
        g = Grid(128, 10.0)
        f = np.random.default_rng(seed).standard_normal(g.shape) * 7
        back = SpectralField.from_physical(g, f).to_physical()
        assert np.abs(back - f).max() <= 1e-12 * np.abs(f).max()

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_nonfinite_rejected(self, bad):
        g = unit_grid(8)
        f = np.zeros(g.shape)
        f[2, 3] = bad
        with pytest.raises(DataError, match="NaN or Inf"):
            SpectralField.from_physical(g, f)

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            SpectralField.from_physical(unit_grid(8), np.zeros((8, 16)))

    def test_coefficients_are_read_only(self):
        f = SpectralField.zeros(unit_grid(8))
        with pytest.raises(ValueError):
            f.coeffs[0, 0] = 1.0

    def test_parseval(self):
        g = Grid(64, 5.0)
        f = np.random.default_rng(3).standard_normal(g.shape)
        phys = g.dx**2 * np.sum(f**2)
        assert SpectralField.from_physical(g, f).norm_sq() == pytest.approx(phys, rel=1e-12)


class TestSymbols:
    def test_fractional_laplacian_eigenvalue(self):
        g = unit_grid(32)
        f = field_of(g, lambda x1, x2: np.cos(3 * x1 + 4 * x2))
        out = apply_symbol(f, FractionalLaplacian(0.5)).to_physical()
        assert np.allclose(out, math.sqrt(5) * f.to_physical(), atol=1e-13)
        assert math.sqrt(5) == pytest.approx(2.2360679, abs=1e-7)

    def test_riesz1_kills_x2_modes(self):
        g = unit_grid(16)
        f = field_of(g, lambda x1, x2: np.cos(x2))
        assert np.abs(apply_symbol(f, Riesz(1)).to_physical()).max() < 1e-15

    def test_riesz1_on_cos_x1(self):
        g = unit_grid(16)
        x1, _ = g.coords
        out = apply_symbol(field_of(g, lambda a, b: np.cos(a)), Riesz(1)).to_physical()
        assert np.allclose(out, np.sin(x1), atol=1e-14)

    def test_hilbert_on_x2_mode(self):
        g = unit_grid(16)
        _, x2 = g.coords
        out = apply_symbol(field_of(g, lambda a, b: np.cos(2 * b)), Hilbert1D(2)).to_physical()
        assert np.allclose(out, np.sin(2 * x2), atol=1e-14)

    def test_band_cutoff_passband(self):
        g = Grid(64, 4 * math.pi)  # xi = k / 2
        f = field_of(g, lambda a, b: np.cos(2.5 * a + 1.5 * b))  # |xi1| = 2.5 >= 2r, |xi| < 4
        out = apply_symbol(f, BandCutoff(1.0, 4.0))
        assert np.allclose(out.coeffs, f.coeffs, atol=1e-15)

    def test_band_cutoff_stopband(self):
        g = Grid(64, 4 * math.pi)
        f = field_of(g, lambda a, b: np.cos(0.5 * a + 2 * b) + np.cos(9 * a))
        out = apply_symbol(f, BandCutoff(1.0, 4.0))
        assert np.abs(out.coeffs).max() < 1e-15

    def test_ball_projection(self):
        g = unit_grid(32)
        f = field_of(g, lambda a, b: np.cos(a) + np.cos(5 * b))
        out = apply_symbol(f, BallProjection(3.0)).to_physical()
        assert np.allclose(out, np.cos(g.coords[0]), atol=1e-14)

    def test_propagator_on_unit_mode(self):
        g = unit_grid(16)
        f = field_of(g, lambda a, b: np.cos(a))
        A, t = 3.0, 0.7
        out = apply_symbol(f, LinearPropagator(A, 1.0, 0.5, t))
        assert out.coeffs[1, 0] == pytest.approx(f.coeffs[1, 0] * np.exp(1j * A * t - t), rel=1e-14)

    def test_phase_is_propagator_without_dissipation(self):
        g = unit_grid(16)
        a = DispersivePhase(2.0, 0.3).multiplier(g)
        b = LinearPropagator(2.0, 0.0, 0.5, 0.3).multiplier(g)
        assert np.array_equal(a, b)

    @pytest.mark.parametrize(
        "factory",
        [
            lambda: FractionalLaplacian(0.0),
            lambda: FractionalLaplacian(2.5),
            lambda: Riesz(3),
            lambda: BandCutoff(2.0, 1.0),
            lambda: BallProjection(0.0),
            lambda: DispersivePhase(-1.0, 1.0),
            lambda: LinearPropagator(1.0, -1.0, 0.5, 1.0),
        ],
    )
    def test_parameter_validation(self, factory):
        with pytest.raises(ConfigurationError):
            factory()

    def test_zero_frequency_convention(self):
        g = unit_grid(8)
        for s in (Riesz(1), Riesz(2), Hilbert1D(1), Hilbert1D(2)):
            assert s.multiplier(g)[0, 0] == 0
        assert DispersivePhase(5.0, 1.0).multiplier(g)[0, 0] == 1


class TestCutoff:
    def test_plateau_and_support(self):
        x = np.linspace(-3, 3, 6001)
        c = smooth_cutoff(x)
        assert np.all(c[np.abs(x) <= 1] == 1)
        assert np.all(c[np.abs(x) >= 2] == 0)
        assert np.all(np.diff(c[x >= 0]) <= 0)

    def test_flat_at_both_ends(self):
        # all finite differences vanish to high order near the junctions
        for x0 in (1.0, 2.0):
            h = 1e-3
            pts = smooth_cutoff(np.array([x0 - h, x0, x0 + h]))
            assert abs(pts[0] - 2 * pts[1] + pts[2]) / h**2 < 1e-100


class TestVelocity:
    def test_cos_x2(self):
        g = unit_grid(16)
        _, x2 = g.coords
        u1, u2 = perp_velocity(field_of(g, lambda a, b: np.cos(b)))
        assert np.allclose(u1.to_physical(), -np.sin(x2), atol=1e-14)
        assert np.abs(u2.to_physical()).max() < 1e-15

    def test_cos_x1(self):
        g = unit_grid(16)
        x1, _ = g.coords
        u1, u2 = perp_velocity(field_of(g, lambda a, b: np.cos(a)))
        assert np.abs(u1.to_physical()).max() < 1e-15
        assert np.allclose(u2.to_physical(), np.sin(x1), atol=1e-14)

    @pytest.mark.parametrize("seed", range(4))
    def test_divergence_free(self, seed):
        g = Grid(64, 20.0)
        theta = SpectralField.from_physical(g, np.random.default_rng(seed).standard_normal(g.shape))
        u1, u2 = perp_velocity(theta)
        # spectral derivatives of real fields use the Nyquist-free odd symbols
        div = 1j * g.xi1_odd * u1.coeffs + 1j * g.xi2_odd * u2.coeffs
        assert np.abs(div).max() * g.box_length <= 1e-12 * theta.norm()


class TestDealias:
    @staticmethod
    def mode(k):
        g = unit_grid(8)
        c = np.zeros(g.shape, dtype=complex)
        c[k, 0] = c[-k, 0] = 0.5
        return SpectralField(g, c)

    def test_low_mode_kept(self):
        f = self.mode(1)
        assert np.array_equal(dealias(f).coeffs, f.coeffs)

    def test_high_mode_removed(self):
        assert np.abs(dealias(self.mode(3)).coeffs).max() == 0

    def test_product_matches_direct_convolution(self):
        n = 16
        g = unit_grid(n)
        f = dealias(random_field(g, 1, gamma=0.0))
        h = dealias(random_field(g, 2, gamma=0.0))
        got = dealiased_product(f, h).coeffs
        lim = n / 3
        ks = [k for k in range(-n // 2, n // 2)]
        want = np.zeros((n, n), dtype=complex)
        for a1 in ks:
            for a2 in ks:
                ca = f.coeffs[a1 % n, a2 % n]
                if ca == 0:
                    continue
                for b1 in ks:
                    for b2 in ks:
                        k1, k2 = a1 + b1, a2 + b2
                        if abs(k1) <= lim and abs(k2) <= lim:
                            want[k1 % n, k2 % n] += ca * h.coeffs[b1 % n, b2 % n]
        assert np.abs(got - want).max() <= 1e-14 * np.abs(want).max()


class TestPadding:
    def test_interpolant_matches_samples_and_cosine(self):
        g = unit_grid(16)
        f = field_of(g, lambda a, b: np.cos(3 * a) * np.sin(2 * b))
        fine = padded_physical(f, 2)
        assert np.allclose(fine[::2, ::2], f.to_physical(), atol=1e-14)
        x = np.arange(32) * TWO_PI / 32
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        assert np.allclose(fine, np.cos(3 * X1) * np.sin(2 * X2), atol=1e-14)


seeds = st.integers(min_value=0, max_value=2**31 - 1)
lengths = st.floats(min_value=1.0, max_value=200.0)
alphas = st.floats(min_value=0.05, max_value=2.0)


def _rand(n, length, seed):
    g = Grid(n, length)
    return SpectralField.from_physical(g, np.random.default_rng(seed).standard_normal(g.shape))


class TestInvariants:
    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, length=lengths)
    def test_dispersive_term_is_skew(self, seed, length):
        f = _rand(32, length, seed)
        assert abs(inner_product(apply_symbol(f, Riesz(1)), f)) <= 1e-12 * f.norm_sq()

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, length=lengths)
    def test_riesz_isometry(self, seed, length):
        # random_field drops the unpaired Nyquist lines, which have no Riesz image
        g = Grid(32, length)
        f = random_field(g, seed, gamma=0.0, dealiased=False)
        f = SpectralField(g, f.coeffs + np.where(g.xi_abs == 0, 2.5, 0))
        mean_free = SpectralField(g, np.where(g.xi_abs == 0, 0, f.coeffs))
        lhs = apply_symbol(f, Riesz(1)).norm_sq() + apply_symbol(f, Riesz(2)).norm_sq()
        assert lhs == pytest.approx(mean_free.norm_sq(), rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds, alpha=alphas, t=st.floats(0, 3), A=st.floats(0, 1e3))
    def test_symbols_commute(self, seed, alpha, t, A):
        f = _rand(16, 7.0, seed)
        s1, s2 = FractionalLaplacian(alpha), LinearPropagator(A, 1.0, min(alpha, 1.0), t)
        a = apply_symbol(apply_symbol(f, s1), s2).coeffs
        b = apply_symbol(apply_symbol(f, s2), s1).coeffs
        assert np.abs(a - b).max() <= 1e-12 * max(np.abs(a).max(), 1e-300)

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds, A=st.floats(0, 1e4), t=st.floats(0, 2), axis=st.sampled_from([1, 2]))
    def test_realness_preserved(self, seed, A, t, axis):
        f = _rand(16, 9.0, seed)
        scale = np.abs(f.to_physical()).max()
        for s in (Riesz(axis), Hilbert1D(axis), DispersivePhase(A, t), BandCutoff(0.5, 2.0),
                  LinearPropagator(A, 0.3, 0.5, t), FractionalLaplacian(0.5), BallProjection(2.0)):
            out = apply_symbol(f, s)
            assert out.imag_residual() <= 1e-12 * scale
        for u in perp_velocity(f):
            assert u.imag_residual() <= 1e-12 * scale

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds, length=lengths)
    def test_parseval_property(self, seed, length):
        g = Grid(16, length)
        f = np.random.default_rng(seed).standard_normal(g.shape)
        spec = SpectralField.from_physical(g, f).norm_sq()
        assert spec == pytest.approx(g.dx**2 * np.sum(f**2), rel=1e-12)
