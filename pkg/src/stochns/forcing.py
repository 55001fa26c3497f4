"""Spectrally coloured Wiener forcing and exact Ornstein-Uhlenbeck updates.

The noise is diagonal in the divergence-free Fourier basis.  Each real basis
function (a cos/sin pair per conjugate pair of wavevectors) carries an
independent standard Brownian motion, so a stored coefficient a_k receives a
complex Gaussian increment with E|da_k|^2 = q_k dt.  Traces count both members
of a conjugate pair.

Random numbers come from a counter-based generator (Philox) keyed by
(seed, component, replica, tag) with the step index in the counter, so the
increment of any stream at any step can be regenerated independently.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError
from .spectral import Lattice, SpectralField

FINITE_BAND = "finite_band"
POWER_LAW = "power_law"


def lowest_shells(lattice, n_shells):
    """Canonical wavevectors (k2 > 0, or k2 == 0 and k1 > 0) in the lowest ``n_shells`` values of |k|^2."""
    half = lattice.kmax
    cands = [
        (k1, k2)
        for k1 in range(-half, half + 1)
        for k2 in range(0, half + 1)
        if k2 > 0 or k1 > 0
    ]
    shells = sorted({k1 * k1 + k2 * k2 for k1, k2 in cands})[:n_shells]
    return tuple(sorted(k for k in cands if k[0] ** 2 + k[1] ** 2 in shells))


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Per-mode variances q_k of a Wiener forcing on a fixed lattice.

    Use :meth:`finite_band` or :meth:`power_law` to build one.
    """

    lattice: Lattice
    kind: str
    params: tuple
    q: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.q.setflags(write=False)

    # construction -----------------------------------------------------

    @classmethod
    def finite_band(cls, lattice, modes, q):
        """Forcing with variance ``q`` on each wavevector in ``modes`` and its conjugate."""
        modes = tuple(sorted({_canonical(k) for k in modes}))
        problems = []
        if q < 0:
            problems.append(f"noise.q must be nonnegative, got {q}")
        arr = np.zeros(lattice.shape)
        for k in modes:
            if k == (0, 0):
                problems.append("noise.modes may not contain the zero mode")
                continue
            if max(abs(k[0]), abs(k[1])) > lattice.kmax:
                problems.append(f"forced mode {k} lies beyond the dealiasing cutoff {lattice.kmax}")
                continue
            _store(arr, lattice, k, q)
        if problems:
            raise ConfigError(problems)
        return cls(lattice, FINITE_BAND, (("modes", modes), ("q", float(q))), arr)

    @classmethod
    def zero(cls, lattice):
        return cls.finite_band(lattice, (), 0.0)

    @classmethod
    def power_law(cls, lattice, amplitude, exponent, cutoff=None):
        """q_j = amplitude * j^(-exponent) in the sorted-eigenvalue index j.

        Wavevectors are ordered by gamma(k), ties broken lexicographically on
        (k1, k2); every wavevector in a tied shell receives the mean of the
        shell's j^(-exponent) values, which keeps the field isotropic and real
        while leaving the trace equal to the plain partial sum.
        """
        problems = []
        if not 1.0 < exponent < 2.0:
            problems.append(
                f"noise.exponent a={exponent} violates (HQi): the power-law spectrum q_j = C j^-a requires 1 < a < 2"
            )
        if amplitude < 0:
            problems.append(f"noise.amplitude must be nonnegative, got {amplitude}")
        cutoff = lattice.kmax if cutoff is None else int(cutoff)
        if not 0 < cutoff <= lattice.kmax:
            problems.append(f"noise.cutoff must lie in [1, {lattice.kmax}], got {cutoff}")
        if problems:
            raise ConfigError(problems)
        ks = [
            (k1, k2)
            for k1 in range(-cutoff, cutoff + 1)
            for k2 in range(-cutoff, cutoff + 1)
            if (k1, k2) != (0, 0)
        ]
        ks.sort(key=lambda k: (k[0] ** 2 + k[1] ** 2, k))
        j = np.arange(1, len(ks) + 1, dtype=float)
        qj = amplitude * j ** (-exponent)
        arr = np.zeros(lattice.shape)
        start = 0
        while start < len(ks):
            r2 = ks[start][0] ** 2 + ks[start][1] ** 2
            stop = start
            while stop < len(ks) and ks[stop][0] ** 2 + ks[stop][1] ** 2 == r2:
                stop += 1
            qs = qj[start:stop].mean()
            for k in ks[start:stop]:
                _store(arr, lattice, k, qs)
            start = stop
        params = (("amplitude", float(amplitude)), ("exponent", float(exponent)), ("cutoff", cutoff))
        return cls(lattice, POWER_LAW, params, arr)

    # derived quantities -------------------------------------------------

    def param(self, name):
        return dict(self.params)[name]

    @cached_property
    def trace_q(self):
        """Tr Q = sum of q over every wavevector (both members of conjugate pairs)."""
        return float(np.sum(self.lattice.weight * self.q))

    @cached_property
    def trace_aq(self):
        """Tr(AQ) = sum of gamma(k) q_k."""
        return float(np.sum(self.lattice.weight * self.lattice.gamma * self.q))

    def weighted_trace(self, alpha):
        g = np.zeros(self.lattice.shape)
        np.power(self.lattice.gamma, 2 * alpha, out=g, where=self.lattice.nonzero)
        return float(np.sum(self.lattice.weight * g * self.q))

    @property
    def alpha0_sup(self):
        """Supremum of admissible alpha_0 in sum_j q_j gamma_j^(2 alpha_0) < inf (continuum limit)."""
        if self.kind == FINITE_BAND:
            return math.inf
        return (self.param("exponent") - 1.0) / 2.0

    @cached_property
    def forced_index(self):
        """Storage indices of canonical forced modes, lexicographic in (k1, k2).

        Returns (rows, cols, mirror_rows) where mirror_rows gives the conjugate
        partner row for modes in the k2 = 0 column (-1 otherwise).
        """
        lat = self.lattice
        rows, cols = np.nonzero(self.q > 0)
        k1 = lat.k1[rows, 0]
        keep = (cols > 0) | (k1 > 0)
        rows, cols, k1 = rows[keep], cols[keep], k1[keep]
        order = np.lexsort((cols, k1))
        rows, cols = rows[order], cols[order]
        mirror = np.where(cols == 0, (-rows) % lat.N, -1)
        return rows, cols, mirror

    @property
    def n_forced(self):
        return len(self.forced_index[0])

    @cached_property
    def digest(self):
        """Stable hash identifying the model (lattice + parameters)."""
        payload = json.dumps(
            {"N": self.lattice.N, "L": repr(self.lattice.L), "kind": self.kind, "params": _jsonable(self.params)},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def __eq__(self, other):
        return isinstance(other, NoiseModel) and self.digest == other.digest

    def __hash__(self):
        return hash(self.digest)


def _store(arr, lattice, k, value):
    """Write a per-wavevector variance, covering both stored copies in the k2 = 0 column."""
    idx, _ = lattice.index(k)
    arr[idx] = value
    if idx[1] == 0:
        arr[(-idx[0]) % lattice.N, 0] = value


def _canonical(k):
    k1, k2 = int(k[0]), int(k[1])
    if k2 < 0 or (k2 == 0 and k1 < 0):
        return (-k1, -k2)
    return (k1, k2)


def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(v) for v in x]
    return x


_COMPONENTS = {"W1": 0, "W2": 1}


@dataclass
class NoiseStream:
    """Single-owner counter-based Gaussian stream.

    ``position`` is the number of increments consumed so far; the increment at
    a given position is a pure function of (seed, component, replica, tag,
    position).
    """

    seed: int
    component: str = "W1"
    replica: int = 0
    tag: int = 0
    position: int = 0

    def __post_init__(self):
        if self.component not in _COMPONENTS:
            raise ValueError(f"component must be W1 or W2, got {self.component!r}")

    @cached_property
    def _key(self):
        ss = np.random.SeedSequence([int(self.seed), _COMPONENTS[self.component], int(self.replica), int(self.tag)])
        return ss.generate_state(2, dtype=np.uint64)

    def normals_at(self, position, n):
        bitgen = np.random.Philox(key=self._key, counter=np.array([0, 0, position, 0], dtype=np.uint64))
        return np.random.Generator(bitgen).standard_normal(n)

    def next_normals(self, n):
        out = self.normals_at(self.position, n)
        self.position += 1
        return out

    def standard_field(self, model):
        """Consume one increment: complex unit-variance Gaussians on the forced modes."""
        lat = model.lattice
        rows, cols, mirror = model.forced_index
        g = self.next_normals(2 * len(rows)).reshape(-1, 2)
        z = (g[:, 0] + 1j * g[:, 1]) * math.sqrt(0.5)
        c = np.zeros(lat.shape, dtype=complex)
        c[rows, cols] = z
        m = mirror >= 0
        c[mirror[m], 0] = np.conj(z[m])
        return c


def stream_pair(seed, replica=0, tag=0, position=0):
    """Independent (W1, W2) streams sharing seed, replica and tag."""
    return (
        NoiseStream(seed, "W1", replica, tag, position),
        NoiseStream(seed, "W2", replica, tag, position),
    )


def wiener_increment(stream, model, dt):
    """Increment W(t + dt) - W(t): per-mode complex Gaussian with variance q_k dt."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    xi = stream.standard_field(model)
    return SpectralField(model.lattice, np.sqrt(model.q * dt) * xi)


def ou_factors(model, nu, dt):
    """Decay factor exp(-nu gamma dt) and exact per-mode noise std of the OU transition."""
    lat = model.lattice
    rate = nu * lat.gamma
    decay = np.exp(-rate * dt)
    var = np.zeros(lat.shape)
    np.divide(-np.expm1(-2.0 * rate * dt), 2.0 * rate, out=var, where=lat.nonzero)
    return decay, np.sqrt(model.q * var)


def ou_increment(current, stream, model, nu, dt):
    """Exact OU transition: a <- exp(-nu gamma dt) a + eta, Var eta = q (1 - e^{-2 nu gamma dt}) / (2 nu gamma)."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if nu <= 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    decay, std = ou_factors(model, nu, dt)
    xi = stream.standard_field(model)
    return SpectralField(current.lattice, decay * current.coeffs + std * xi)


@dataclass
class SpectrumReport:
    rows: list
    trace_q: float
    trace_aq: float
    alpha0_sup: float
    fitted_exponent: float = None

    def to_csv_rows(self):
        return [("k1", "k2", "gamma", "q")] + [tuple(r) for r in self.rows]


def spectrum_report(model):
    """Tabulate (k, gamma(k), q_k) for forced wavevectors plus traces and the alpha_0 range."""
    lat = model.lattice
    rows = []
    r, c = np.nonzero(model.q > 0)
    for i, j in zip(r, c):
        k1, k2 = int(lat.k1[i, 0]), int(lat.k2[0, j])
        rows.append((k1, k2, float(lat.gamma[i, j]), float(model.q[i, j])))
        if j > 0:
            rows.append((-k1, -k2, float(lat.gamma[i, j]), float(model.q[i, j])))
    rows.sort(key=lambda r: (r[0] ** 2 + r[1] ** 2, r[0], r[1]))
    fitted = None
    if model.kind == POWER_LAW and len(rows) > 4:
        q = np.array([r[3] for r in rows])
        j = np.arange(1, len(q) + 1)
        fitted = -float(np.polyfit(np.log(j), np.log(q), 1)[0])
    return SpectrumReport(rows, model.trace_q, model.trace_aq, model.alpha0_sup, fitted)
