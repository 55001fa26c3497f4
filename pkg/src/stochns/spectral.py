"""Divergence-free Fourier representation of velocity fields on the 2D torus.

A field is stored as one complex scalar per wavevector k, the coefficient
along the complex unit vector i k^perp/|k| with k^perp = (-k2, k1):

    u(x) = sum_k a_k (i k^perp/|k|) exp(i 2 pi k.x / L)

so incompressibility holds structurally and a_k = |2 pi k/L| psi_k for the
stream function psi.  The factor i makes the basis vector even under
k -> -k, so a real field satisfies a_(-k) = conj(a_k).  Coefficients use the ``rfft2``
half-plane layout, shape ``(N, N//2 + 1)``: axis 0 carries k1 in ``fftfreq``
order, axis 1 carries k2 >= 0.  Norms are area-normalised, so a single mode
k with a_k = 1 (and its conjugate) has |u|_H^2 = 2.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, LatticeMismatchError

_FFT_PRIMES = (2, 3, 5, 7)


def _fft_friendly(n):
    for p in _FFT_PRIMES:
        while n % p == 0:
            n //= p
    return n == 1


@dataclass(frozen=True)
class Lattice:
    """Truncated wavevector lattice and collocation grid for an N x N torus."""

    N: int
    L: float = 2 * np.pi

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N <= 0 or self.N % 2:
            raise DomainError(f"resolution N must be an even positive integer, got {self.N!r}")
        if not _fft_friendly(int(self.N)):
            raise DomainError(f"resolution N={self.N} has prime factors other than 2, 3, 5, 7")
        if not self.L > 0:
            raise DomainError(f"domain size L must be positive, got {self.L!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L", float(self.L))

    @property
    def shape(self):
        return (self.N, self.N // 2 + 1)

    @property
    def kmax(self):
        """Dealiasing cutoff (2/3 rule): largest K with 3K < N, so quadratic products never alias."""
        return (self.N - 1) // 3

    @property
    def h(self):
        return self.L / self.N

    @cached_property
    def k1(self):
        return np.rint(np.fft.fftfreq(self.N, 1.0 / self.N)).astype(int)[:, None]

    @cached_property
    def k2(self):
        return np.arange(self.N // 2 + 1)[None, :]

    @cached_property
    def kappa1(self):
        return (2 * np.pi / self.L) * self.k1

    @cached_property
    def kappa2(self):
        return (2 * np.pi / self.L) * self.k2

    @cached_property
    def nonzero(self):
        m = np.ones(self.shape, dtype=bool)
        m[0, 0] = False
        return m

    @cached_property
    def gamma(self):
        """Stokes eigenvalue |2 pi k / L|^2 (0 at the excluded zero mode)."""
        return np.broadcast_to(self.kappa1**2 + self.kappa2**2, self.shape).copy()

    @cached_property
    def e1(self):
        """First component of i k^perp/|k|."""
        kk = np.sqrt(self.gamma)
        out = np.zeros(self.shape)
        np.divide(-np.broadcast_to(self.kappa2, self.shape), kk, out=out, where=self.nonzero)
        return 1j * out

    @cached_property
    def e2(self):
        kk = np.sqrt(self.gamma)
        out = np.zeros(self.shape)
        np.divide(np.broadcast_to(self.kappa1, self.shape), kk, out=out, where=self.nonzero)
        return 1j * out

    @cached_property
    def dealias_mask(self):
        m = (np.abs(self.k1) <= self.kmax) & (self.k2 <= self.kmax)
        return m & self.nonzero

    @cached_property
    def nyquist_mask(self):
        return (np.abs(self.k1) == self.N // 2) | (self.k2 == self.N // 2)

    @cached_property
    def weight(self):
        """Multiplicity of each stored coefficient (itself plus its conjugate)."""
        w = np.full(self.shape, 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        return w

    @cached_property
    def grad_ops(self):
        """Multipliers giving d1 v1, d2 v1, d1 v2, d2 v2 from a scalar coefficient."""
        return np.stack([
            1j * self.kappa1 * self.e1,
            1j * self.kappa2 * self.e1,
            1j * self.kappa1 * self.e2,
            1j * self.kappa2 * self.e2,
        ])

    @cached_property
    def proj_ops(self):
        """Leray projection onto i k^perp/|k| fused with the dealiasing mask."""
        return np.stack([np.conj(self.e1) * self.dealias_mask, np.conj(self.e2) * self.dealias_mask])

    def index(self, k):
        """Storage index of wavevector ``k``, and whether it is stored conjugated."""
        k1, k2 = int(k[0]), int(k[1])
        conj = k2 < 0 or (k2 == 0 and k1 < 0)
        if conj:
            k1, k2 = -k1, -k2
        half = self.N // 2
        if abs(k1) > half or k2 > half:
            raise DomainError(f"wavevector {k} is outside the lattice of resolution {self.N}")
        return (k1 % self.N, k2), conj

    def grid(self):
        x = np.arange(self.N) * self.h
        return np.meshgrid(x, x, indexing="ij")


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Immutable divergence-free field: lattice plus complex coefficients."""

    lattice: Lattice
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.lattice.shape:
            raise LatticeMismatchError(f"coefficient shape {c.shape} does not match lattice {self.lattice.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, lattice):
        return cls(lattice, np.zeros(lattice.shape, dtype=complex))

    @classmethod
    def from_modes(cls, lattice, modes):
        """Build a field from ``{(k1, k2): a_k}``; conjugate partners are implied."""
        c = np.zeros(lattice.shape, dtype=complex)
        for k, a in modes.items():
            if tuple(k) == (0, 0):
                raise DomainError("the zero mode is excluded")
            idx, conj = lattice.index(k)
            a = np.conj(a) if conj else a
            c[idx] += a
            if idx[1] == 0:
                mirror = ((-idx[0]) % lattice.N, 0)
                if mirror != idx:
                    c[mirror] += np.conj(a)
        return cls(lattice, c)

    @classmethod
    def random(cls, lattice, rng, slope=0.0, dealiased=True):
        """Gaussian random field with E|a_k|^2 proportional to |k|^(-slope)."""
        shape = lattice.shape
        c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        amp = np.zeros(shape)
        np.power(lattice.gamma, -slope / 4.0, out=amp, where=lattice.nonzero)
        c = c * amp
        mask = lattice.dealias_mask if dealiased else lattice.nonzero & ~lattice.nyquist_mask
        return cls(lattice, hermitian_column(c * mask, lattice))

    def _check(self, other):
        if self.lattice != other.lattice:
            raise LatticeMismatchError(f"lattice mismatch: {self.lattice} vs {other.lattice}")

    def __add__(self, other):
        self._check(other)
        return SpectralField(self.lattice, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return SpectralField(self.lattice, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.lattice, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.lattice, -self.coeffs)

    def coefficient(self, k):
        idx, conj = self.lattice.index(k)
        a = self.coeffs[idx]
        return np.conj(a) if conj else a

    def vector_coeffs(self):
        """Per-mode C^2 velocity coefficients, shape (2, N, N//2+1)."""
        return np.stack([self.coeffs * self.lattice.e1, self.coeffs * self.lattice.e2])

    def dealiased(self):
        return SpectralField(self.lattice, self.coeffs * self.lattice.dealias_mask)


def hermitian_column(c, lattice):
    """Enforce a_(-k1,0) = conj(a_(k1,0)) in the k2 = 0 column (and Nyquist column)."""
    c = np.array(c, dtype=complex)
    n = lattice.N
    rev = (-np.arange(n)) % n
    for col in {0, c.shape[1] - 1}:
        v = c[:, col]
        c[:, col] = 0.5 * (v + np.conj(v[rev]))
    c[0, 0] = 0.0
    return c


@dataclass(frozen=True)
class PhysicalField:
    """Velocity samples (u1, u2) on the N x N collocation grid."""

    lattice: Lattice
    u1: np.ndarray = field(repr=False)
    u2: np.ndarray = field(repr=False)

    def component(self, direction):
        """Projection onto the unit vector ``direction``."""
        return direction[0] * self.u1 + direction[1] * self.u2


def project_leray(raw, lattice):
    """Leray projection of per-mode C^2 coefficients ``raw`` (shape (2, ...)).

    Returns the component along i k^perp/|k|; the gradient part is discarded.
    """
    raw = np.asarray(raw)
    return SpectralField(lattice, np.conj(lattice.e1) * raw[0] + np.conj(lattice.e2) * raw[1])


def sobolev_norm_sq(f, alpha):
    """Return ``sum_k gamma(k)^(2 alpha) |a_k|^2`` over the full lattice."""
    lat = f.lattice
    if alpha == 0:
        g = lat.weight
    else:
        g = np.zeros(lat.shape)
        np.power(lat.gamma, 2.0 * alpha, out=g, where=lat.nonzero)
        g = g * lat.weight
    return float(np.sum(g * (f.coeffs.real**2 + f.coeffs.imag**2)))


def inner(f, g):
    """H inner product <f, g> (real, area-normalised)."""
    f._check(g)
    w = f.lattice.weight
    return float(np.sum(w * (f.coeffs.real * g.coeffs.real + f.coeffs.imag * g.coeffs.imag)))


def apply_semigroup(f, t, nu):
    """Stokes semigroup exp(-nu A t) applied mode by mode."""
    if t < 0:
        raise DomainError(f"semigroup time must be nonnegative, got {t}")
    if nu <= 0:
        raise DomainError(f"viscosity must be positive, got {nu}")
    return SpectralField(f.lattice, f.coeffs * np.exp(-nu * f.lattice.gamma * t))


def stokes(f, power=1.0):
    """A^power f for a real exponent (zero mode stays zero)."""
    lat = f.lattice
    g = np.zeros(lat.shape)
    np.power(lat.gamma, power, out=g, where=lat.nonzero)
    return SpectralField(lat, f.coeffs * g)


def _irfft(c, n):
    return np.fft.irfft2(c, s=(n, n), norm="forward")


def _rfft(x):
    return np.fft.rfft2(x, norm="forward")


def transform_to_physical(f):
    lat = f.lattice
    u = _irfft(f.vector_coeffs(), lat.N)
    return PhysicalField(lat, u[0], u[1])


def transform_to_spectral(g):
    """Forward transform followed by Leray projection; Nyquist modes are dropped."""
    lat = g.lattice
    raw = _rfft(np.stack([g.u1, g.u2]))
    raw[:, lat.nyquist_mask] = 0.0
    return project_leray(raw, lat)


def _advect(a_phys, b_coeffs, lat):
    """Dealiased, projected (a . grad) b for each field in ``b_coeffs`` (shape (m, ...))."""
    g = _irfft(b_coeffs[:, None] * lat.grad_ops, lat.N)
    prod = np.empty((b_coeffs.shape[0], 2, lat.N, lat.N))
    np.multiply(a_phys[0], g[:, 0], out=prod[:, 0])
    prod[:, 0] += a_phys[1] * g[:, 1]
    np.multiply(a_phys[0], g[:, 2], out=prod[:, 1])
    prod[:, 1] += a_phys[1] * g[:, 3]
    raw = _rfft(prod)
    return lat.proj_ops[0] * raw[:, 0] + lat.proj_ops[1] * raw[:, 1]


def advecting_velocity(f):
    """Physical velocity of ``f`` as an array of shape (2, N, N)."""
    return _irfft(f.vector_coeffs(), f.lattice.N)


def bilinear_B(u, v):
    """Pseudo-spectral B(u, v) = Pi[(u . grad) v], dealiased by the 2/3 rule."""
    u._check(v)
    lat = u.lattice
    out = _advect(advecting_velocity(u), v.coeffs[None], lat)
    return SpectralField(lat, out[0])


def bilinear_B_many(u, fields):
    """B(u, v) for several v sharing the same advecting field (one transform of u)."""
    lat = u.lattice
    for v in fields:
        u._check(v)
    a = advecting_velocity(u)
    out = _advect(a, np.stack([v.coeffs for v in fields]), lat)
    return [SpectralField(lat, c) for c in out], a
