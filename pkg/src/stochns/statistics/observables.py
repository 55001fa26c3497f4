"""Norm observables of the pair state recorded along a trajectory."""

import numpy as np

from ..spectral import inner, sobolev_norm_sq, stokes, transform_to_physical, bilinear_B_many

COMPONENTS = ("u", "w", "pair")


def _q_weighted(f, q, gamma_power=0.0):
    lat = f.lattice
    c = f.coeffs
    g = lat.weight * q
    if gamma_power:
        g = g * lat.gamma ** (2 * gamma_power)
    return float(np.sum(g * (c.real**2 + c.imag**2)))


def norm_observables(state, p_list=(2,), noise=None, noise2=None):
    """Observable values for one state.

    Keys (c in u, w, pair; pair norms add the squared component norms):
      c_H, c_V, c_DA                   |x|_H^2, ||x||_V^2, ||x||_D(A)^2
      c_Hp{p}, c_HpV{p}                |x|_H^(p-2), |x|_H^(p-2) ||x||_V^2
      c_Vp{p}, c_VpDA{p}               ||x||_V^(p-2), ||x||_V^(p-2) ||x||_D(A)^2
    With noise models given, for p > 2 also the Ito quadratic-variation terms
      pair_QH{p} = |x|^(p-4) <Q x, x>,  pair_QV{p} = ||x||_V^(p-4) <Q A x, A x>.
    """
    out = {"one": 1.0}
    norms = {}
    for name, f in (("u", state.u), ("w", state.w)):
        norms[name] = (sobolev_norm_sq(f, 0.0), sobolev_norm_sq(f, 0.5), sobolev_norm_sq(f, 1.0))
    norms["pair"] = tuple(a + b for a, b in zip(norms["u"], norms["w"]))
    for c in COMPONENTS:
        h, v, da = norms[c]
        out[f"{c}_H"], out[f"{c}_V"], out[f"{c}_DA"] = h, v, da
        for p in p_list:
            hp = h ** ((p - 2) / 2)
            vp = v ** ((p - 2) / 2)
            out[f"{c}_Hp{p}"] = hp
            out[f"{c}_HpV{p}"] = hp * v
            out[f"{c}_Vp{p}"] = vp
            out[f"{c}_VpDA{p}"] = vp * da
    if noise is not None:
        noise2 = noise if noise2 is None else noise2
        h, v, _ = norms["pair"]
        qh = _q_weighted(state.u, noise.q) + _q_weighted(state.w, noise2.q)
        qv = _q_weighted(state.u, noise.q, 1.0) + _q_weighted(state.w, noise2.q, 1.0)
        for p in p_list:
            if p > 2:
                out[f"pair_QH{p}"] = h ** ((p - 4) / 2) * qh if h > 0 else 0.0
                out[f"pair_QV{p}"] = v ** ((p - 4) / 2) * qv if v > 0 else 0.0
    return out


def transfer_term(state, lam):
    """<B_lam(x, x), A x> for the pair: enstrophy exchange by the nonlinearity."""
    a = state.u + lam * state.w
    (bu, bw), _ = bilinear_B_many(a, [state.u, state.w])
    return inner(bu, stokes(state.u)) + inner(bw, stokes(state.w))


def increment_moment(field, m, p=2):
    """Direction-averaged longitudinal |delta u|^p at separation m grid steps (x and y)."""
    ph = transform_to_physical(field)
    d1 = np.roll(ph.u1, -m, axis=0) - ph.u1
    d2 = np.roll(ph.u2, -m, axis=1) - ph.u2
    return 0.5 * (np.mean(np.abs(d1) ** p) + np.mean(np.abs(d2) ** p))


def observe(state, acc, p_list=(2,), noise=None, noise2=None):
    """Append the observables of ``state`` to ``acc`` and return it."""
    return acc.add(norm_observables(state, p_list, noise, noise2))


class MomentObserver:
    """Integration hook recording norm observables (and optional extras) into an accumulator.

    ``s2_separations`` lists grid offsets m for which S^2_u(m h) and S^2_w(m h)
    are recorded per observation; ``track_transfer`` records the pair
    transfer term <B_lam(x, x), A x> (costs one extra nonlinear evaluation).
    """

    def __init__(self, acc, p_list=(2,), noise=None, noise2=None, lam=0.0, track_transfer=False, s2_separations=()):
        self.acc = acc
        self.p_list = tuple(p_list)
        self.noise = noise
        self.noise2 = noise2
        self.lam = lam
        self.track_transfer = track_transfer
        self.s2_separations = tuple(s2_separations)

    def values(self, state):
        vals = norm_observables(state, self.p_list, self.noise, self.noise2)
        if self.track_transfer:
            bax = transfer_term(state, self.lam)
            vals["pair_BAx"] = bax
            for p in self.p_list:
                if p > 2:
                    vals[f"pair_VpBAx{p}"] = vals[f"pair_Vp{p}"] * bax
        for m in self.s2_separations:
            vals[f"S2_u_m{m}"] = increment_moment(state.u, m)
            vals[f"S2_w_m{m}"] = increment_moment(state.w, m)
        return vals

    def __call__(self, state):
        self.acc.add(self.values(state))
