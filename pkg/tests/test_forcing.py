import math

import numpy as np
import pytest

from stochns.errors import ConfigError
from stochns.forcing import (
    NoiseModel,
    NoiseStream,
    lowest_shells,
    ou_increment,
    spectrum_report,
    stream_pair,
    wiener_increment,
)
from stochns.spectral import Lattice, SpectralField, apply_semigroup, sobolev_norm_sq


def full_spectrum(field):
    """Expand the half-plane storage to the full N x N spectrum using conjugate symmetry."""
    lat = field.lattice
    n = lat.N
    full = np.zeros((n, n), dtype=complex)
    c = field.coeffs
    full[:, : n // 2 + 1] = c
    for k2 in range(1, n // 2):
        full[(-np.arange(n)) % n, n - k2] = np.conj(c[:, k2])
    return full


@pytest.fixture
def lat16():
    return Lattice(16)


def single_mode(lat, q, k=(1, 0)):
    return NoiseModel.finite_band(lat, [k], q)


class TestNoiseModel:
    def test_finite_band_trace_counts_conjugates(self, lat16):
        m = NoiseModel.finite_band(lat16, [(1, 0), (0, 1), (1, 1), (1, -1)], 0.001)
        assert m.trace_q == pytest.approx(0.008)
        assert spectrum_report(m).trace_q == pytest.approx(0.008)

    def test_trace_aq(self, lat16):
        m = NoiseModel.finite_band(lat16, [(1, 0), (1, 1)], 0.5)
        assert m.trace_aq == pytest.approx(2 * 0.5 * 1 + 2 * 0.5 * 2)

    def test_lowest_shells(self, lat16):
        modes = lowest_shells(lat16, 2)
        assert set(modes) == {(1, 0), (0, 1), (1, 1), (-1, 1)}
        assert len(lowest_shells(lat16, 4)) == 10

    def test_power_law_trace_is_partial_sum(self, lat16):
        m = NoiseModel.power_law(lat16, 1.0, 1.5)
        K = lat16.kmax
        J = (2 * K + 1) ** 2 - 1
        expected = sum(j**-1.5 for j in range(1, J + 1))
        assert m.trace_q == pytest.approx(expected, rel=1e-12)

    def test_power_law_ties_share_variance(self, lat16):
        m = NoiseModel.power_law(lat16, 1.0, 1.5)
        rows = spectrum_report(m).rows
        by_shell = {}
        for k1, k2, g, q in rows:
            by_shell.setdefault(k1 * k1 + k2 * k2, set()).add(q)
        assert all(len(v) == 1 for v in by_shell.values())
        qs = [next(iter(by_shell[r])) for r in sorted(by_shell)]
        assert all(a > b for a, b in zip(qs, qs[1:]))

    def test_power_law_report_exponent(self):
        m = NoiseModel.power_law(Lattice(64), 2.0, 1.5)
        rep = spectrum_report(m)
        assert rep.fitted_exponent == pytest.approx(1.5, abs=0.05)
        assert rep.alpha0_sup == pytest.approx(0.25)

    @pytest.mark.parametrize("a", [2.5, 1.0, 0.5, 2.0])
    def test_power_law_outside_hqi(self, lat16, a):
        with pytest.raises(ConfigError, match="HQi"):
            NoiseModel.power_law(lat16, 1.0, a)

    def test_forced_mode_beyond_cutoff(self, lat16):
        with pytest.raises(ConfigError):
            NoiseModel.finite_band(lat16, [(7, 0)], 1.0)

    def test_hash_and_equality(self, lat16):
        a = NoiseModel.finite_band(lat16, [(1, 0)], 0.1)
        b = NoiseModel.finite_band(lat16, [(-1, 0)], 0.1)
        c = NoiseModel.finite_band(lat16, [(1, 0)], 0.2)
        assert a == b and hash(a) == hash(b)
        assert a != c


class TestStreams:
    def test_reproducible(self, lat16):
        m = NoiseModel.power_law(lat16, 1.0, 1.5)
        a = [NoiseStream(7, "W1").standard_field(m) for _ in range(2)]
        assert np.array_equal(a[0], a[1])
        s = NoiseStream(7, "W1")
        seq = [s.standard_field(m) for _ in range(3)]
        s2 = NoiseStream(7, "W1", position=2)
        assert np.array_equal(s2.standard_field(m), seq[2])

    def test_identities_differ(self, lat16):
        m = single_mode(lat16, 1.0)
        base = NoiseStream(1, "W1").next_normals(8)
        for other in (NoiseStream(2, "W1"), NoiseStream(1, "W2"), NoiseStream(1, "W1", replica=1), NoiseStream(1, "W1", tag=3)):
            assert not np.array_equal(other.next_normals(8), base)

    def test_w1_w2_uncorrelated(self, lat16):
        m = single_mode(lat16, 1.0)
        s1, s2 = stream_pair(11)
        n = 100_000
        x = np.array([s1.standard_field(m)[1, 0].real for _ in range(n)])
        y = np.array([s2.standard_field(m)[1, 0].real for _ in range(n)])
        assert abs(np.corrcoef(x, y)[0, 1]) <= 3 / math.sqrt(n)

    def test_reality(self, lat16):
        m = NoiseModel.power_law(lat16, 1.0, 1.5)
        s = NoiseStream(5)
        for _ in range(20):
            f = wiener_increment(s, m, 0.1)
            phys = np.fft.ifft2(full_spectrum(f), norm="forward")
            assert np.max(np.abs(phys.imag)) <= 1e-13


class TestWienerIncrement:
    def test_zero_model(self, lat16):
        f = wiener_increment(NoiseStream(0), NoiseModel.zero(lat16), 0.3)
        assert not np.any(f.coeffs)

    def test_single_mode_variance(self, lat16):
        m = single_mode(lat16, 2.0)
        s = NoiseStream(3)
        vals = np.array([abs(wiener_increment(s, m, 0.5).coefficient((1, 0))) ** 2 for _ in range(100_000)])
        assert vals.mean() == pytest.approx(1.0, rel=0.03)

    def test_sobolev_moment(self, lat16):
        m = NoiseModel.finite_band(lat16, lowest_shells(lat16, 3), 0.2)
        alpha0, t = 0.5, 0.7
        expected = t * m.weighted_trace(alpha0)
        s = NoiseStream(4)
        vals = [sobolev_norm_sq(wiener_increment(s, m, t), alpha0) for _ in range(10_000)]
        assert np.mean(vals) == pytest.approx(expected, rel=0.05)


class TestOU:
    def test_zero_noise_is_semigroup(self, lat16, rng):
        f = SpectralField.random(lat16, rng)
        g = ou_increment(f, NoiseStream(0), NoiseModel.zero(lat16), 0.3, 0.25)
        assert np.allclose(g.coeffs, apply_semigroup(f, 0.25, 0.3).coeffs, rtol=1e-15, atol=0)

    def test_transition_law(self, lat16):
        # one step from a fixed state: mean exp(-nu gamma dt) a, variance q (1 - e^{-2 nu gamma dt}) / (2 nu gamma)
        nu, dt, q = 0.7, 0.3, 1.5
        m = single_mode(lat16, q, (1, 1))
        gam = 2.0
        a0 = SpectralField.from_modes(lat16, {(1, 1): 1.0 - 0.5j})
        n = 20_000
        vals = np.array([ou_increment(a0, NoiseStream(9, position=i), m, nu, dt).coefficient((1, 1)) for i in range(n)])
        mean = np.exp(-nu * gam * dt) * (1.0 - 0.5j)
        var = q * (1 - np.exp(-2 * nu * gam * dt)) / (2 * nu * gam)
        se_mean = math.sqrt(var / 2 / n)
        assert abs(vals.real.mean() - mean.real) <= 3 * se_mean
        assert abs(vals.imag.mean() - mean.imag) <= 3 * se_mean
        dev = np.abs(vals - mean) ** 2
        assert abs(dev.mean() - var) <= 3 * dev.std() / math.sqrt(n)

    def test_stationary_variance_and_lag1(self, lat16):
        nu, dt, q = 1.0, 0.5, 2.0
        m = single_mode(lat16, q)
        s = NoiseStream(21)
        z = SpectralField.zeros(lat16)
        chain = []
        for i in range(100_000 + 200):
            z = ou_increment(z, s, m, nu, dt)
            if i >= 200:
                chain.append(z.coefficient((1, 0)))
        a = np.array(chain)
        var = q / (2 * nu * 1.0)
        assert np.mean(np.abs(a) ** 2) == pytest.approx(var, rel=0.03)
        rho = math.exp(-nu * dt)
        lag1 = np.mean((a[:-1] * np.conj(a[1:])).real)
        # batch-means standard error of the lag-1 product series
        prod = (a[:-1] * np.conj(a[1:])).real
        b = prod[: len(prod) // 50 * 50].reshape(50, -1).mean(axis=1)
        assert abs(lag1 - rho * var) <= 3 * b.std(ddof=1) / math.sqrt(50)

    def test_quarter_norm_stable_under_dt_halving(self, lat16):
        nu = 0.5
        m = NoiseModel.finite_band(lat16, lowest_shells(lat16, 2), 0.4)
        exact = sum(
            w * qk * g**0.5 / (2 * nu * g)
            for w, qk, g in zip(lat16.weight.ravel(), m.q.ravel(), lat16.gamma.ravel())
            if qk > 0
        )
        means, ses = [], []
        for dt, seed in ((0.2, 1), (0.1, 2)):
            s = NoiseStream(seed)
            z = SpectralField.zeros(lat16)
            vals = []
            n = int(2000 / dt)
            for i in range(n):
                z = ou_increment(z, s, m, nu, dt)
                if i * dt > 20:
                    vals.append(sobolev_norm_sq(z, 0.25))
            v = np.array(vals)
            b = v[: len(v) // 30 * 30].reshape(30, -1).mean(axis=1)
            means.append(v.mean())
            ses.append(b.std(ddof=1) / math.sqrt(30))
        assert np.isfinite(means).all()
        assert abs(means[0] - means[1]) <= 3 * math.hypot(*ses)
        for mu, se in zip(means, ses):
            assert abs(mu - exact) <= 3 * se
