import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import convolution_B, full_modes
from stochns.errors import DomainError, LatticeMismatchError
from stochns.spectral import (
    Lattice,
    PhysicalField,
    SpectralField,
    apply_semigroup,
    bilinear_B,
    inner,
    project_leray,
    sobolev_norm_sq,
    stokes,
    transform_to_physical,
    transform_to_spectral,
)


def hnorm(f):
    return math.sqrt(sobolev_norm_sq(f, 0.0))


class TestLattice:
    @pytest.mark.parametrize("n", [7, 0, -4, 22])
    def test_rejects_bad_resolution(self, n):
        with pytest.raises(DomainError):
            Lattice(n)

    def test_rejects_nonpositive_length(self):
        with pytest.raises(DomainError):
            Lattice(16, L=0.0)

    def test_dealias_cutoff(self):
        assert Lattice(64).kmax == 21
        assert Lattice(16).kmax == 5

    def test_gamma_positive_off_zero_mode(self, lattice):
        assert np.all(lattice.gamma[lattice.nonzero] > 0)
        idx, _ = lattice.index((1, 0))
        assert lattice.gamma[idx] == pytest.approx(1.0)

    def test_closed_under_negation(self):
        lat = Lattice(16)
        for k in [(3, -2), (-5, 0), (0, 4)]:
            idx, conj = lat.index(k)
            idx2, conj2 = lat.index((-k[0], -k[1]))
            assert conj != conj2 or k[1] == 0


class TestLeray:
    def test_fixes_range(self, lattice, rng):
        f = SpectralField.random(lattice, rng)
        g = project_leray(f.vector_coeffs(), lattice)
        assert np.allclose(g.coeffs, f.coeffs, rtol=0, atol=1e-15)

    def test_kills_gradients(self, lattice, rng):
        phi = rng.standard_normal(lattice.shape) + 1j * rng.standard_normal(lattice.shape)
        kk = np.sqrt(lattice.gamma)
        raw = np.stack([lattice.kappa1 * phi, lattice.kappa2 * phi + 0 * lattice.kappa1]) / np.where(kk > 0, kk, 1)
        assert np.max(np.abs(project_leray(raw, lattice).coeffs)) < 1e-15

    def test_idempotent(self, lattice, rng):
        for _ in range(100):
            raw = rng.standard_normal((2,) + lattice.shape) + 1j * rng.standard_normal((2,) + lattice.shape)
            once = project_leray(raw, lattice)
            twice = project_leray(once.vector_coeffs(), lattice)
            assert np.max(np.abs(twice.coeffs - once.coeffs)) <= 1e-15 * max(1.0, np.max(np.abs(once.coeffs)))

    def test_self_adjoint(self, lattice, rng):
        # <P x, y> = <x, P y> for the C^2 inner product with lattice multiplicities
        x = rng.standard_normal((2,) + lattice.shape) + 1j * rng.standard_normal((2,) + lattice.shape)
        y = rng.standard_normal((2,) + lattice.shape) + 1j * rng.standard_normal((2,) + lattice.shape)
        w = lattice.weight
        px = project_leray(x, lattice).vector_coeffs()
        py = project_leray(y, lattice).vector_coeffs()
        lhs = np.sum(w * (px * np.conj(y)).real)
        rhs = np.sum(w * (x * np.conj(py)).real)
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestSobolev:
    def test_zero_field(self):
        z = SpectralField.zeros(Lattice(16))
        for a in (-0.5, 0.0, 0.25, 1.0):
            assert sobolev_norm_sq(z, a) == 0.0

    def test_single_mode(self):
        f = SpectralField.from_modes(Lattice(16), {(1, 0): 1.0})
        assert sobolev_norm_sq(f, 0.5) == pytest.approx(2.0)
        assert sobolev_norm_sq(f, 0.0) == pytest.approx(2.0)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), slope=st.floats(0, 6))
    def test_interpolation_inequality(self, seed, slope):
        f = SpectralField.random(Lattice(16), np.random.default_rng(seed), slope=slope)
        lhs = sobolev_norm_sq(f, 0.25) ** 2
        rhs = sobolev_norm_sq(f, 0.0) * sobolev_norm_sq(f, 0.5)
        assert lhs <= rhs * (1 + 1e-12)


class TestBilinear:
    def test_single_mode_self_advection_vanishes(self):
        lat = Lattice(16)
        u = SpectralField.from_modes(lat, {(2, 1): 0.7 - 0.3j})
        assert hnorm(bilinear_B(u, u)) <= 1e-13

    def test_cross_modes_match_convolution(self):
        lat = Lattice(8)
        u = SpectralField.from_modes(lat, {(1, 0): 1.0})
        v = SpectralField.from_modes(lat, {(0, 1): 1.0})
        b = bilinear_B(u, v)
        got = full_modes(b)
        assert set(got) == {(1, 1), (1, -1), (-1, 1), (-1, -1)}
        ref = convolution_B(u, v, lat.kmax)
        for k, val in ref.items():
            assert abs(got.get(k, 0) - val) < 1e-14

    @pytest.mark.parametrize("seed", range(5))
    def test_random_fields_match_convolution(self, seed):
        lat = Lattice(12)
        rng = np.random.default_rng(seed)
        u = SpectralField.random(lat, rng)
        v = SpectralField.random(lat, rng)
        got = bilinear_B(u, v)
        ref = convolution_B(u, v, lat.kmax)
        err = max(abs(got.coefficient(k) - val) for k, val in ref.items())
        assert err < 1e-13
        assert set(k for k, a in full_modes(got).items() if abs(a) > 1e-14) <= set(ref)

    def test_energy_neutral(self, lattice, rng):
        for _ in range(20):
            u, v = SpectralField.random(lattice, rng), SpectralField.random(lattice, rng)
            b = bilinear_B(u, v)
            assert abs(inner(b, v)) <= 1e-12 * hnorm(b) * hnorm(v)

    def test_skew_symmetric(self, lattice, rng):
        for _ in range(20):
            u, v, z = (SpectralField.random(lattice, rng) for _ in range(3))
            a, b = inner(bilinear_B(u, v), z), inner(bilinear_B(u, z), v)
            scale = hnorm(bilinear_B(u, v)) * hnorm(z) + hnorm(bilinear_B(u, z)) * hnorm(v)
            assert abs(a + b) <= 1e-12 * scale

    def test_vorticity_identity(self, lattice, rng):
        for _ in range(20):
            u = SpectralField.random(lattice, rng, slope=2.0)
            b = bilinear_B(u, u)
            au = stokes(u)
            assert abs(inner(b, au)) <= 1e-11 * hnorm(b) * hnorm(au)

    def test_bilinearity(self, lattice, rng):
        u1, u2, v = (SpectralField.random(lattice, rng) for _ in range(3))
        lhs = bilinear_B(2.5 * u1 - 0.75 * u2, v)
        rhs = 2.5 * bilinear_B(u1, v) - 0.75 * bilinear_B(u2, v)
        assert hnorm(lhs - rhs) <= 1e-14 * hnorm(lhs)

    def test_dealiasing_closure(self, lattice, rng):
        u = SpectralField.random(lattice, rng, dealiased=False)
        b = bilinear_B(u, u)
        assert np.all(b.coeffs[~lattice.dealias_mask] == 0)

    def test_lattice_mismatch(self, rng):
        with pytest.raises(LatticeMismatchError):
            bilinear_B(SpectralField.zeros(Lattice(16)), SpectralField.zeros(Lattice(32)))

    def test_dual_norm_ratio_bounded(self, rng):
        # ||B(u,v)||_{V'} <= C ||u||_{D(A^1/4)} ||v||_{D(A^1/4)}; C is not pinned, the ratio must stay finite
        lat = Lattice(32)
        ratios = []
        for slope in (0.0, 2.0, 4.0):
            for _ in range(10):
                u, v = SpectralField.random(lat, rng, slope), SpectralField.random(lat, rng, slope)
                num = math.sqrt(sobolev_norm_sq(bilinear_B(u, v), -0.5))
                den = math.sqrt(sobolev_norm_sq(u, 0.25) * sobolev_norm_sq(v, 0.25))
                ratios.append(num / den)
        assert np.isfinite(ratios).all() and max(ratios) < 10.0


class TestSemigroup:
    def test_identity_at_zero(self, rng):
        f = SpectralField.random(Lattice(16), rng)
        assert np.array_equal(apply_semigroup(f, 0.0, 1.0).coeffs, f.coeffs)

    def test_halves_unit_mode(self):
        f = SpectralField.from_modes(Lattice(16), {(1, 0): 1.0})
        g = apply_semigroup(f, math.log(2.0), 1.0)
        assert g.coefficient((1, 0)) == pytest.approx(0.5, abs=1e-15)

    def test_composition(self, lattice, rng):
        f = SpectralField.random(lattice, rng)
        a = apply_semigroup(apply_semigroup(f, 0.013, 0.7), 0.029, 0.7)
        b = apply_semigroup(f, 0.042, 0.7)
        assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-14 * np.max(np.abs(f.coeffs))

    def test_negative_time(self):
        with pytest.raises(DomainError):
            apply_semigroup(SpectralField.zeros(Lattice(16)), -1.0, 1.0)


class TestTransforms:
    def test_cosine_mode(self):
        lat = Lattice(16)
        x1, x2 = lat.grid()
        # u = (0, cos x1) is the real part of the divergence-free mode k = (1, 0)
        g = PhysicalField(lat, np.zeros_like(x1), np.cos(x1))
        f = transform_to_spectral(g)
        nz = {k: a for k, a in full_modes(f).items() if abs(a) > 1e-14}
        assert set(nz) == {(1, 0), (-1, 0)}
        assert nz[(1, 0)] == pytest.approx(-0.5j)
        assert nz[(-1, 0)] == pytest.approx(np.conj(nz[(1, 0)]))

    def test_parseval(self, lattice, rng):
        for _ in range(10):
            f = SpectralField.random(lattice, rng, dealiased=False)
            p = transform_to_physical(f)
            phys = np.mean(p.u1**2 + p.u2**2)
            assert phys == pytest.approx(sobolev_norm_sq(f, 0.0), rel=1e-12)

    def test_round_trip_spectral(self, lattice, rng):
        f = SpectralField.random(lattice, rng, dealiased=False)
        g = transform_to_spectral(transform_to_physical(f))
        assert hnorm(g - f) <= 1e-12 * hnorm(f)

    def test_round_trip_physical_after_projection(self, lattice, rng):
        g = PhysicalField(lattice, rng.standard_normal((lattice.N,) * 2), rng.standard_normal((lattice.N,) * 2))
        once = transform_to_physical(transform_to_spectral(g))
        twice = transform_to_physical(transform_to_spectral(once))
        err = np.sqrt(np.mean((once.u1 - twice.u1) ** 2 + (once.u2 - twice.u2) ** 2))
        assert err <= 1e-12 * np.sqrt(np.mean(once.u1**2 + once.u2**2))

    def test_divergence_free_in_physical_space(self, rng):
        lat = Lattice(32)
        f = SpectralField.random(lat, rng)
        p = transform_to_physical(f)
        d1 = np.fft.ifft(1j * np.fft.fftfreq(lat.N, 1 / lat.N)[:, None] * np.fft.fft(p.u1, axis=0), axis=0).real
        d2 = np.fft.ifft(1j * np.fft.fftfreq(lat.N, 1 / lat.N)[None, :] * np.fft.fft(p.u2, axis=1), axis=1).real
        assert np.max(np.abs(d1 + d2)) < 1e-12
