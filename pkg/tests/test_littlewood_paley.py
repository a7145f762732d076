import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgdisp.errors import BlockRangeError, ConfigurationError
from qgdisp.littlewood_paley import (
    BesovNormSpec,
    DyadicPartition,
    all_blocks,
    bernstein_audit,
    bernstein_ratio,
    besov_norm,
    commutator_audit,
    commutator_member,
    commutator_terms,
    dyadic_block,
    exact_advection,
    partition_constant,
    product_audit,
    product_member,
    psi,
    zeta,
)
from qgdisp.spectral_core import Grid, SpectralField, inner_product, random_field

TWO_PI = 2 * math.pi


def mode(grid, k1, k2, amp=1.0):
    x1, x2 = grid.coords
    return SpectralField.from_physical(grid, amp * np.cos(grid.dk * (k1 * x1 + k2 * x2)))


class TestProfiles:
    def test_supports(self):
        rho = np.linspace(0, 4, 40001)
        assert np.all(zeta(rho)[rho <= 0.75] == 1)
        assert np.all(zeta(rho)[rho >= 4 / 3] == 0)
        p = psi(rho)
        assert np.all(p[(rho <= 0.75) | (rho >= 8 / 3)] == 0)
        assert np.all(p >= 0)

    def test_partition_constant_is_one_half(self):
        # two adjacent profiles sum to one, so psi^2 + (1-psi)^2 >= 1/2 with equality at psi = 1/2
        assert partition_constant() == pytest.approx(0.5, abs=1e-6)

    @pytest.mark.parametrize("n,length", [(64, TWO_PI), (128, 32 * math.pi), (32, 3.0)])
    def test_partition_of_unity_on_lattice(self, n, length):
        g = Grid(n, length)
        part = DyadicPartition(g)
        inhom = sum(part.multiplier(q, False) for q in part.indices(False))
        hom = sum(part.multiplier(q, True) for q in part.indices(True))
        assert np.abs(inhom - 1).max() <= 1e-10
        nz = g.xi_abs > 0
        assert np.abs(hom[nz] - 1).max() <= 1e-10


class TestBlocks:
    def test_out_of_range(self):
        g = Grid(32, TWO_PI)
        f = random_field(g, 0)
        part = DyadicPartition(g)
        with pytest.raises(BlockRangeError):
            dyadic_block(f, part.q_max + 1)
        with pytest.raises(BlockRangeError):
            dyadic_block(f, -2, homogeneous=False)
        with pytest.raises(BlockRangeError):
            dyadic_block(f, part.q_min - 1, homogeneous=True)

    @pytest.mark.parametrize("q", [1, 2, 3])
    def test_single_mode_lives_in_neighbouring_blocks(self, q):
        g = Grid(64, TWO_PI)
        f = mode(g, 2**q, 0)
        near = sum(dyadic_block(f, j).coeffs for j in (q - 1, q, q + 1))
        assert np.allclose(near, f.coeffs, atol=1e-15)

    def test_low_block_of_constant(self):
        g = Grid(16, TWO_PI)
        c = SpectralField.from_physical(g, np.full(g.shape, 2.0))
        assert np.allclose(dyadic_block(c, -1).to_physical(), 2.0, atol=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), length=st.floats(1.0, 100.0), homogeneous=st.booleans())
    def test_reconstruction(self, seed, length, homogeneous):
        g = Grid(32, length)
        f = random_field(g, seed, gamma=0.5)
        total = sum(b.coeffs for b in all_blocks(f, homogeneous).values())
        # homogeneous blocks see the mean-free part, and random_field is mean free
        assert np.abs(total - f.coeffs).max() * g.box_length <= 1e-10 * f.norm()

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_almost_orthogonality(self, seed):
        g = Grid(64, TWO_PI)
        f = random_field(g, seed, gamma=0.0)
        blocks = all_blocks(f, False)
        for q, bq in blocks.items():
            for p, bp in blocks.items():
                if abs(p - q) >= 2:
                    assert inner_product(bq, bp) == 0.0


class TestBesov:
    @pytest.mark.parametrize("seed", range(5))
    def test_l2_equivalence(self, seed):
        g = Grid(64, 10.0)
        f = random_field(g, seed, gamma=1.0)
        ratio = besov_norm(f, BesovNormSpec(0.0)) / f.norm()
        c = partition_constant()
        assert math.sqrt(c) - 1e-12 <= ratio <= 1 + 1e-12
        assert c <= ratio

    @pytest.mark.parametrize("q,s", [(2, 0.5), (3, -1.0), (4, 1.5)])
    def test_single_mode_weight(self, q, s):
        g = Grid(64, TWO_PI)
        f = mode(g, 2**q, 0, amp=1.3)
        z1 = float(zeta(1.0))
        want = f.norm() * math.sqrt((2 ** (q * s) * (1 - z1)) ** 2 + (2 ** ((q - 1) * s) * z1) ** 2)
        assert besov_norm(f, BesovNormSpec(s)) == pytest.approx(want, rel=1e-12)

    def test_sobolev_equivalence(self):
        g = Grid(64, TWO_PI)
        c = partition_constant()
        for seed in range(3):
            f = random_field(g, seed, gamma=1.0)
            for s in (-0.5, 0.0, 1.0):
                b = besov_norm(f, BesovNormSpec(s)) ** 2
                h = f.sobolev_norm_sq(s)
                # on block q, 2^(2q) and 1+|xi|^2 differ by at most a factor 16
                assert c * 16 ** -abs(s) <= b / h <= 16 ** abs(s)

    @pytest.mark.parametrize("spec", [BesovNormSpec(1.0), BesovNormSpec(0.3, math.inf, 2, True), BesovNormSpec(0, 1, math.inf)])
    def test_zero_field(self, spec):
        assert besov_norm(SpectralField.zeros(Grid(16, TWO_PI)), spec) == 0.0

    @pytest.mark.parametrize("p,r", [(0.5, 2), (2, 0.0)])
    def test_bad_exponents(self, p, r):
        with pytest.raises(ConfigurationError):
            BesovNormSpec(0.0, p, r)


class TestBernstein:
    def test_k0_ratio_is_one(self):
        g = Grid(64, TWO_PI)
        f = random_field(g, 3, band=(8, 16))
        assert bernstein_ratio(f, 8, 0.0, 2, 2) == pytest.approx(1.0, rel=1e-14)

    def test_single_mode_k1(self):
        g = Grid(64, TWO_PI)
        f = mode(g, 3, 4)
        assert bernstein_ratio(f, 5.0, 1.0, 2, 2) == pytest.approx(1.0, rel=1e-13)

    def test_small_ensemble_is_lambda_stable(self):
        rep = bernstein_audit(4, seed=11)
        assert rep.constants["stability"] <= 2.0
        assert len(rep.rows) == 2 * 2 * 4

    def test_deterministic(self):
        a = bernstein_audit(2, seed=5, grid=Grid(128, TWO_PI))
        b = bernstein_audit(2, seed=5, grid=Grid(128, TWO_PI))
        assert a.to_csv() == b.to_csv()


class TestCommutator:
    @pytest.mark.parametrize("s,beta", [(0.5, 0.0), (0.5, 2.0), (-1.8, 0.3), (2.0, 1.0)])
    def test_parameter_ranges(self, s, beta):
        with pytest.raises(ConfigurationError):
            commutator_audit(2, None, s, beta, 0)

    def test_single_real_mode_vanishes(self):
        g = Grid(32, TWO_PI)
        terms = commutator_terms(mode(g, 3, 2), 0.5, 1.0)
        assert max(terms.values()) < 1e-13

    def test_single_shell_high_side(self):
        g = Grid(128, TWO_PI)
        q0 = 3
        f = random_field(g, 5, gamma=0.0, band=(0.75 * 2**q0, 8 / 3 * 2**q0))
        terms = commutator_terms(f, 0.5, 1.0)
        peak = max(terms.values())
        for q, v in terms.items():
            if q - q0 > 5:
                assert v <= 1e-14 * peak
        # a quadratic product in shell q0 cannot reach blocks beyond q0 + 2
        assert all(v <= 1e-14 * peak for q, v in terms.items() if q >= q0 + 3)

    def test_ensemble_bounded(self):
        rep = commutator_audit(6, None, 0.5, 1.0, seed=2, grid=Grid(64, TWO_PI), band=(1.0, 20.0))
        assert rep.constants["max_over_median"] <= 4.0
        assert rep.rows and all(r.audit_name == "commutator" for r in rep.rows)

    def test_member_matches_definition(self):
        g = Grid(32, TWO_PI)
        f = random_field(g, 9, gamma=1.0, band=(1, 10))
        total, ratios = commutator_member(f, 0.25, 0.75)
        assert total == pytest.approx(math.sqrt(sum(r * r for r in ratios.values())))


class TestProduct:
    def test_two_mode_advection_closed_form(self):
        g = Grid(16, TWO_PI)
        x1, x2 = g.coords
        v1 = SpectralField.zeros(g)
        v2 = SpectralField.from_physical(g, np.cos(x1))  # divergence free, mode (1, 0)
        f = SpectralField.from_physical(g, np.cos(x2))  # mode (0, 1)
        out = exact_advection(v1, v2, f)
        big = out.grid
        y1, y2 = big.coords
        want = -0.5 * (np.sin(y2 + y1) + np.sin(y2 - y1))
        assert np.allclose(out.to_physical(), want, atol=1e-14)

    def test_constant_field(self):
        g = Grid(32, 8 * math.pi)
        f = SpectralField.from_physical(g, np.full(g.shape, 1.5))
        assert product_member(f, 2.0, 0.5, 0.5) == (0.0, 0.0, 0.0)

    @pytest.mark.parametrize("beta,s", [(0.0, 0.5), (1.0, 0.5), (0.9, -0.2)])
    def test_parameter_ranges(self, beta, s):
        with pytest.raises(ConfigurationError):
            product_audit(2, 2.0, beta, s, 0)

    def test_scaling_and_doubling(self):
        rep = product_audit(6, 4.0, 0.5, 0.5, seed=1, grid=Grid(128, 8 * math.pi))
        c = rep.constants
        assert abs(c["scaling_exponent"] - c["predicted_exponent"]) <= 0.5
        assert c["high_doubling_factor"] <= 2.0
        assert {r.audit_name for r in rep.rows} == {"product_high", "product_low"}
        assert rep.to_csv().splitlines()[0] == "audit_name,index,params,empirical_ratio,ensemble_median,ensemble_max"
