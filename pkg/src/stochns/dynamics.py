"""Time integration of the lambda-coupled stochastic Navier-Stokes pair.

    du + [nu A u + B(u, u) + lam B(w, u)] dt = dW1
    dw + [nu A w + B(u, w) + lam B(w, w)] dt = dW2

Scheme: exponential Euler-Maruyama.  The Stokes part is integrated exactly,
the nonlinearity is explicit, and the noise enters through the exact OU
transition of each mode:

    a <- exp(-nu gamma dt) (a - dt * drift) + sigma(dt) xi

The update is affine in (drift, noise), so linear changes of variables such
as q = u + lam w or v = lam w commute with the scheme.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import BlowUpError, DomainError, StabilityError
from .forcing import NoiseModel, ou_factors, stream_pair
from .spectral import Lattice, SpectralField, _advect, sobolev_norm_sq

log = logging.getLogger(__name__)

#: Advective stability constant: dt <= CFL * (L/N) / u_max warns above it.
CFL = 0.5
#: Steps beyond CFL_HARD * (L/N) / u_max are rejected.
CFL_HARD = 1.0


class StabilityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    nu: float
    lam: float
    dt: float
    T: float
    noise: NoiseModel
    noise_w: NoiseModel = None
    seed: int = 0
    burn_in: float = 0.0
    observe_every: int = 1
    checkpoint_every: int = 0
    nonlinear: bool = True
    replica: int = 0
    stream_tag: int = 0

    def __post_init__(self):
        problems = []
        if not self.nu > 0:
            problems.append(f"nu must be positive, got {self.nu}")
        if not self.dt > 0:
            problems.append(f"dt must be positive, got {self.dt}")
        if self.T < 0:
            problems.append(f"T must be nonnegative, got {self.T}")
        if self.noise_w is not None and self.noise_w.lattice != self.noise.lattice:
            problems.append("noise models for W1 and W2 live on different lattices")
        if self.observe_every < 1:
            problems.append("observe_every must be >= 1")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def lattice(self):
        return self.noise.lattice

    @property
    def N(self):
        return self.lattice.N

    @property
    def L(self):
        return self.lattice.L

    @property
    def noise2(self):
        return self.noise if self.noise_w is None else self.noise_w

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))

    @property
    def burn_in_steps(self):
        return int(round(self.burn_in / self.dt))

    def streams(self, position=0):
        return stream_pair(self.seed, self.replica, self.stream_tag, position)


@dataclass(frozen=True)
class PairState:
    u: SpectralField
    w: SpectralField
    t: float = 0.0
    step: int = 0

    @classmethod
    def zeros(cls, lattice):
        z = SpectralField.zeros(lattice)
        return cls(z, z)


@dataclass(frozen=True)
class _Factors:
    decay: np.ndarray
    std1: np.ndarray
    std2: np.ndarray


@lru_cache(maxsize=64)
def _factors(noise, noise2, nu, dt):
    decay, std1 = ou_factors(noise, nu, dt)
    _, std2 = ou_factors(noise2, nu, dt)
    return _Factors(decay, std1, std2)


def _check_cfl(a_phys, lat, dt, t):
    umax = float(np.sqrt(np.max(a_phys[0] ** 2 + a_phys[1] ** 2)))
    if umax == 0.0:
        return
    bound = lat.h / umax
    if dt > CFL_HARD * bound:
        raise StabilityError(
            f"step rejected at t={t:.6g}: dt={dt:g} exceeds {CFL_HARD:g}*h/u_max={CFL_HARD * bound:.4g} (u_max={umax:.4g})"
        )
    if dt > CFL * bound:
        warnings.warn(
            f"dt={dt:g} exceeds advective bound {CFL:g}*h/u_max={CFL * bound:.4g} at t={t:.6g}",
            StabilityWarning,
            stacklevel=3,
        )


def _check_finite(coeffs, t):
    if not np.all(np.isfinite(coeffs)):
        finite = np.abs(coeffs[np.isfinite(coeffs)])
        big = float(finite.max()) if finite.size else math.nan
        raise BlowUpError(f"non-finite coefficients at t={t:.6g} (max finite |a_k| = {big:.4g})", t=t, max_abs=big)


def coupled_drift(state, lam, nonlinear=True):
    """Evaluate B_lam(x, x) = (B(u + lam w, u), B(u + lam w, w)).

    Returns (drift_u, drift_w, advecting velocity in physical space); with
    the nonlinearity disabled the drift is zero and no velocity is returned.
    """
    lat = state.u.lattice
    if not nonlinear:
        z = np.zeros(lat.shape, dtype=complex)
        return z, z, None
    a = state.u.coeffs + lam * state.w.coeffs if lam != 0 else state.u.coeffs
    a_phys = np.fft.irfft2(np.stack([a * lat.e1, a * lat.e2]), s=(lat.N, lat.N), norm="forward")
    out = _advect(a_phys, np.stack([state.u.coeffs, state.w.coeffs]), lat)
    return out[0], out[1], a_phys


def step_pair(state, cfg, streams, check_cfl=True):
    """Advance the coupled pair by one exponential Euler-Maruyama step."""
    lat = state.u.lattice
    f = _factors(cfg.noise, cfg.noise2, cfg.nu, cfg.dt)
    du, dw, a_phys = coupled_drift(state, cfg.lam, cfg.nonlinear)
    # without advection there is no stability constraint: the linear part is exact
    if check_cfl and a_phys is not None:
        _check_cfl(a_phys, lat, cfg.dt, state.t)
    xi1 = streams[0].standard_field(cfg.noise)
    xi2 = streams[1].standard_field(cfg.noise2)
    dt = cfg.dt
    u = f.decay * (state.u.coeffs - dt * du) + f.std1 * xi1
    w = f.decay * (state.w.coeffs - dt * dw) + f.std2 * xi2
    t = state.t + dt
    _check_finite(u, t)
    _check_finite(w, t)
    return PairState(SpectralField(lat, u), SpectralField(lat, w), t, state.step + 1)


def step_single(u, cfg, streams, scale=(1.0, 0.0), check_cfl=True, t=0.0):
    """One step of du + [nu A u + B(u, u)] dt = s1 dW1 + s2 dW2.

    Consumes one increment from each stream of ``streams`` (exactly what
    :func:`step_pair` consumes), scaled by ``scale``.
    """
    lat = u.lattice
    f = _factors(cfg.noise, cfg.noise2, cfg.nu, cfg.dt)
    s1, s2 = scale
    if cfg.nonlinear:
        a_phys = np.fft.irfft2(np.stack([u.coeffs * lat.e1, u.coeffs * lat.e2]), s=(lat.N, lat.N), norm="forward")
        drift = _advect(a_phys, u.coeffs[None], lat)[0]
    else:
        a_phys = None
        drift = 0.0
    if check_cfl and a_phys is not None:
        _check_cfl(a_phys, lat, cfg.dt, t)
    xi1 = streams[0].standard_field(cfg.noise)
    xi2 = streams[1].standard_field(cfg.noise2)
    new = f.decay * (u.coeffs - cfg.dt * drift) + s1 * (f.std1 * xi1) + s2 * (f.std2 * xi2)
    _check_finite(new, t + cfg.dt)
    return SpectralField(lat, new)


def _h_dist(a, b):
    return math.sqrt(sobolev_norm_sq(a - b, 0.0))


def reduction_oracle(cfg, n_steps, initial=None):
    """Max over steps of |q - (u + lam w)|_H, with q integrated directly under dW1 + lam dW2.

    Returns (max distance, max of |q|_H over the run) so callers can apply a
    relative bound.
    """
    lat = cfg.lattice
    state = initial if initial is not None else PairState.zeros(lat)
    q = state.u + cfg.lam * state.w
    pair_streams = cfg.streams()
    single_streams = cfg.streams()
    dmax, qmax = 0.0, 0.0
    for n in range(n_steps):
        state = step_pair(state, cfg, pair_streams)
        q = step_single(q, cfg, single_streams, (1.0, cfg.lam), t=state.t)
        dmax = max(dmax, _h_dist(q, state.u + cfg.lam * state.w))
        qmax = max(qmax, math.sqrt(sobolev_norm_sq(q, 0.0)))
    return dmax, qmax


def step_symmetric(u, v, cfg, streams, check_cfl=True):
    """One step of the (u, v) system with v = lam w: noise lam dW2 on the v equation."""
    lat = u.lattice
    f = _factors(cfg.noise, cfg.noise2, cfg.nu, cfg.dt)
    if cfg.nonlinear:
        a = u.coeffs + v.coeffs
        a_phys = np.fft.irfft2(np.stack([a * lat.e1, a * lat.e2]), s=(lat.N, lat.N), norm="forward")
        if check_cfl:
            _check_cfl(a_phys, lat, cfg.dt, 0.0)
        d = _advect(a_phys, np.stack([u.coeffs, v.coeffs]), lat)
    else:
        d = np.zeros((2,) + lat.shape, dtype=complex)
    xi1 = streams[0].standard_field(cfg.noise)
    xi2 = streams[1].standard_field(cfg.noise2)
    un = f.decay * (u.coeffs - cfg.dt * d[0]) + f.std1 * xi1
    vn = f.decay * (v.coeffs - cfg.dt * d[1]) + cfg.lam * (f.std2 * xi2)
    return SpectralField(lat, un), SpectralField(lat, vn)


def symmetric_form_oracle(cfg, n_steps, initial=None):
    """Max over steps of the H~ distance between (u, lam w) and the directly integrated (u, v) system.

    Returns (max distance, max |(u, v)|_H~).
    """
    if cfg.lam == 0:
        raise DomainError("the change of variables v = lam w degenerates at lam = 0")
    lat = cfg.lattice
    state = initial if initial is not None else PairState.zeros(lat)
    u, v = state.u, cfg.lam * state.w
    s_pair = cfg.streams()
    s_sym = cfg.streams()
    dmax, nmax = 0.0, 0.0
    for _ in range(n_steps):
        state = step_pair(state, cfg, s_pair)
        u, v = step_symmetric(u, v, cfg, s_sym)
        d2 = sobolev_norm_sq(u - state.u, 0.0) + sobolev_norm_sq(v - cfg.lam * state.w, 0.0)
        dmax = max(dmax, math.sqrt(d2))
        nmax = max(nmax, math.sqrt(sobolev_norm_sq(u, 0.0) + sobolev_norm_sq(v, 0.0)))
    return dmax, nmax


@dataclass
class SweepResult:
    lambdas: list
    lam0: float
    e_u: dict
    e_w: dict
    failed: dict = field(default_factory=dict)


def lambda_sweep(cfg_base, lambdas, n_steps, lam0=0.0, initial=None):
    """Pathwise sup-distances e(lam) = max_t |u^lam - u^lam0|_H (and for w) under shared noise.

    All runs reuse the seed and stream identities of ``cfg_base`` so the
    noise paths coincide.  A run that blows up is recorded in ``failed``.
    """
    lat = cfg_base.lattice
    start = initial if initial is not None else PairState.zeros(lat)
    runs = {}
    failed = {}
    lams = [lam0] + [l for l in lambdas if l != lam0]
    states = {}
    streams = {}
    for lam in lams:
        states[lam] = start
        streams[lam] = (replace(cfg_base, lam=lam), cfg_base.streams())
    e_u = {lam: 0.0 for lam in lambdas}
    e_w = {lam: 0.0 for lam in lambdas}
    for _ in range(n_steps):
        for lam in lams:
            if lam in failed:
                continue
            cfg, st = streams[lam]
            try:
                states[lam] = step_pair(states[lam], cfg, st)
            except (BlowUpError, StabilityError) as exc:
                if lam == lam0:
                    raise
                failed[lam] = str(exc)
        ref = states[lam0]
        for lam in lambdas:
            if lam in failed or lam == lam0:
                continue
            e_u[lam] = max(e_u[lam], _h_dist(states[lam].u, ref.u))
            e_w[lam] = max(e_w[lam], _h_dist(states[lam].w, ref.w))
    return SweepResult(sorted(lambdas, reverse=True), lam0, e_u, e_w, failed)


@dataclass
class RunResult:
    final: PairState
    n_observations: int
    checkpoints: list


def integrate(cfg, observers=(), initial=None, on_checkpoint=None, stop_step=None):
    """Run burn-in and measurement phases from ``initial`` (zero field by default).

    Observers are called as ``obs(state)`` every ``cfg.observe_every`` steps
    once the state is past burn-in.  ``on_checkpoint(state)`` is invoked every
    ``cfg.checkpoint_every`` steps and should return a reference (e.g. path)
    that is attached to a :class:`BlowUpError` if the run later fails.
    Resuming from a checkpointed state continues the same noise path.
    """
    lat = cfg.lattice
    state = initial if initial is not None else PairState.zeros(lat)
    total = cfg.n_steps if stop_step is None else stop_step
    streams = cfg.streams(position=state.step)
    burn = cfg.burn_in_steps
    n_obs = 0
    refs = []
    while state.step < total:
        try:
            state = step_pair(state, cfg, streams)
        except BlowUpError as exc:
            exc.checkpoint = refs[-1] if refs else None
            raise
        n = state.step
        if n > burn and (n - burn) % cfg.observe_every == 0:
            for obs in observers:
                obs(state)
            n_obs += 1
        if on_checkpoint is not None and cfg.checkpoint_every and n % cfg.checkpoint_every == 0:
            refs.append(on_checkpoint(state))
    return RunResult(state, n_obs, refs)
