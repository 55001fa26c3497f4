"""Stationary moment identities checked against time averages.

Every check compares a time average ``lhs`` with a right-hand side built from
noise traces and other time averages. The standard error is the batch-means
error of the per-sample difference series, so correlated fluctuations shared
by both sides cancel.

Trace convention: ``TrQ`` is the trace of the covariance of one component
(both members of every conjugate pair counted). The pair is forced by two
independent copies, so the pair trace is the sum of the two component traces
and the per-component value used below is half of it.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientDataError
from .accumulator import batch_means_se


@dataclass(frozen=True)
class IdentityReport:
    name: str
    lhs: float
    rhs: float
    rel_err: float
    stderr: float
    passed: bool
    rhs_ito: float = math.nan
    note: str = ""

    def row(self):
        return (self.name, self.lhs, self.rhs, self.rel_err, self.stderr, int(self.passed))


def _half_trace(noise, noise2, attr):
    noise2 = noise if noise2 is None else noise2
    return 0.5 * (getattr(noise, attr) + getattr(noise2, attr))


def _compare(name, acc, lhs_key, coef, rhs_key, rel_tol, n_batches, rhs_ito=math.nan, note="", se_factor=3.0):
    if acc.count(lhs_key) < 2 * n_batches or acc.count(rhs_key) < 2 * n_batches:
        raise InsufficientDataError(
            f"{name}: {acc.count(lhs_key)} samples, need at least {2 * n_batches} for {n_batches} batches"
        )
    x = acc.series(lhs_key)
    y = coef * acc.series(rhs_key)
    n = min(len(x), len(y))
    lhs, rhs = float(x.mean()), float(y.mean())
    se = batch_means_se(x[:n] - y[:n], n_batches)
    diff = abs(lhs - rhs)
    rel = diff / abs(rhs) if rhs != 0 else (0.0 if lhs == 0 else math.inf)
    passed = diff <= max(rel_tol * abs(rhs), se_factor * se)
    return IdentityReport(name, lhs, rhs, rel, se, bool(passed), rhs_ito, note)


def enstrophy_identity_check(acc, noise, nu, noise2=None, rel_tol=0.05, n_batches=30):
    """Time average of the pair V-norm against (per-component TrQ)/nu."""
    tq = _half_trace(noise, noise2, "trace_q")
    return _compare("enstrophy", acc, "pair_V", tq / nu, "one", rel_tol, n_batches, rhs_ito=tq / nu)


def p_moment_identity_check(acc, noise, nu, p, noise2=None, rel_tol=0.10, n_batches=30):
    """avg |x|_H^(p-2) ||x||_V^2 against (p-1)/nu TrQ avg |x|_H^(p-2).

    ``rhs_ito`` holds the value the Ito formula gives when the quadratic
    variation term is kept exactly,
    (TrQ avg|x|^(p-2) + (p-2)/2 avg |x|^(p-4) <Qx, x>) / nu,
    available when the accumulator recorded ``pair_QH{p}``. For p > 2 the
    right-hand side with (p-1) TrQ is an upper bound of this quantity.
    """
    tq = _half_trace(noise, noise2, "trace_q")
    note = "odd p: extrapolation" if p % 2 else ""
    ito = math.nan
    if p == 2:
        ito = tq / nu * acc.mean("pair_Hp2")
    elif f"pair_QH{p}" in acc:
        ito = (tq * acc.mean(f"pair_Hp{p}") + 0.5 * (p - 2) * acc.mean(f"pair_QH{p}")) / nu
    if p == 2:
        # the same comparison as the enstrophy identity, bit for bit
        rep = enstrophy_identity_check(acc, noise, nu, noise2, rel_tol, n_batches)
        return IdentityReport(f"p_moment_H_p{p}", rep.lhs, rep.rhs, rep.rel_err, rep.stderr, rep.passed, ito, note)
    return _compare(
        f"p_moment_H_p{p}", acc, f"pair_HpV{p}", (p - 1) * tq / nu, f"pair_Hp{p}", rel_tol, n_batches, ito, note
    )


def vorticity_moment_identity_check(acc, noise, nu, p, noise2=None, rel_tol=0.10, n_batches=30):
    """avg ||x||_V^(p-2) ||x||_D(A)^2 against (p-1)/nu Tr(AQ) avg ||x||_V^(p-2).

    ``rhs_ito`` keeps the nonlinear transfer term and the exact quadratic
    variation when the accumulator recorded ``pair_BAx`` (p = 2) or
    ``pair_VpBAx{p}`` and ``pair_QV{p}``.
    """
    taq = _half_trace(noise, noise2, "trace_aq")
    note = "odd p: extrapolation" if p % 2 else ""
    ito = math.nan
    bax = "pair_BAx" if p == 2 else f"pair_VpBAx{p}"
    if bax in acc and (p == 2 or f"pair_QV{p}" in acc):
        ito = taq * acc.mean(f"pair_Vp{p}") - acc.mean(bax)
        if p > 2:
            ito += 0.5 * (p - 2) * acc.mean(f"pair_QV{p}")
        ito /= nu
    rel_name = f"p_moment_V_p{p}"
    if p == 2:
        return _compare(rel_name, acc, "pair_DA", taq / nu, "one", rel_tol, n_batches, ito, note)
    return _compare(rel_name, acc, f"pair_VpDA{p}", (p - 1) * taq / nu, f"pair_Vp{p}", rel_tol, n_batches, ito, note)


def ou_single_mode_moments(q, nu, gamma, p):
    """Closed-form stationary moments of the pair when both components are OU with one forced mode.

    Each stored coefficient is complex Gaussian with E|a|^2 = s = q/(2 nu gamma);
    the pair H-norm is 2(|a_u|^2 + |a_w|^2) ~ Gamma(shape 2, scale 2s). Returns
    a dict with the averages entering the identities at order p.
    """
    s = q / (2 * nu * gamma)

    def gamma_moment(r):
        # E X^r for X ~ Gamma(2, 2s)
        return (2 * s) ** r * math.gamma(2 + r) / math.gamma(2)

    return {
        "pair_Hp": gamma_moment((p - 2) / 2),
        "pair_HpV": gamma * gamma_moment(p / 2),
        "pair_Vp": gamma ** ((p - 2) / 2) * gamma_moment((p - 2) / 2),
        "pair_VpDA": gamma ** (p / 2 + 1) * gamma_moment(p / 2),
        "trace_q": 2 * q,
        "trace_aq": 2 * q * gamma,
    }


def mc_versus_closed_form(acc, key, expected, n_batches=30, se_factor=3.0):
    """Time average of ``key`` against an exact value, within ``se_factor`` batch-means SE."""
    x = acc.series(key)
    if len(x) < 2 * n_batches:
        raise InsufficientDataError(f"{key}: {len(x)} samples")
    mean = float(np.mean(x))
    se = batch_means_se(x, n_batches)
    rel = abs(mean - expected) / abs(expected) if expected else abs(mean)
    return IdentityReport(
        f"closed_form_{key}", mean, expected, rel, se, bool(abs(mean - expected) <= se_factor * se)
    )
