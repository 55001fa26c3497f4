"""Distances between stationary statistics at different couplings."""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .accumulator import batch_means_se


@dataclass(frozen=True)
class ConvergenceRow:
    observable: str
    lam: float
    distance: float
    stderr: float


@dataclass(frozen=True)
class ConvergenceSummary:
    observable: str
    lambdas: tuple
    distances: tuple
    step_gaps: tuple
    step_se: tuple
    monotone: bool
    endpoint_gap: float
    endpoint_se: float
    endpoint_pass: bool


@dataclass(frozen=True)
class ConvergenceReport:
    lam0: float
    rows: tuple
    summaries: tuple

    def summary(self, observable):
        return next(s for s in self.summaries if s.observable == observable)


def _signed_diff(acc, ref, key):
    x, y = acc.series(key), ref.series(key)
    return x, y, len(x) == len(y)


def measure_convergence_report(runs, lam0, panel, n_batches=30, n_sigma=2.0):
    """Distances d(lam) = |avg_lam phi - avg_lam0 phi| for each observable in ``panel``.

    ``runs`` maps coupling values to accumulators and must contain ``lam0``.
    When two runs have equally long series (shared noise, same cadence) the
    standard errors are batch-means errors of the paired difference series,
    which removes the common noise; otherwise independent errors are added in
    quadrature. Couplings are ordered by decreasing distance from ``lam0``; a
    step counts as a decrease when the drop exceeds ``n_sigma`` standard errors.
    """
    if lam0 not in runs:
        raise ConfigError(f"reference coupling {lam0} has no run")
    problems = []
    for lam, acc in runs.items():
        missing = [k for k in panel if k not in acc]
        if missing:
            problems.append(f"lambda={lam} lacks observables {missing}")
    if problems:
        raise ConfigError(problems)
    ref = runs[lam0]
    others = sorted((l for l in runs if l != lam0), key=lambda l: -abs(l - lam0))
    rows, summaries = [], []
    for key in panel:
        signed = []
        for lam in others:
            x, y, paired = _signed_diff(runs[lam], ref, key)
            if paired:
                d = x - y
                mean = float(d.mean())
                se = batch_means_se(d, n_batches)
            else:
                d = None
                mean = float(x.mean() - y.mean())
                se = math.hypot(batch_means_se(x, n_batches), batch_means_se(y, n_batches))
            signed.append((mean, se, d))
            rows.append(ConvergenceRow(key, lam, abs(mean), se))
        gaps, gap_se = [], []

        def gap(i, j):
            (mi, si, di), (mj, sj, dj) = signed[i], signed[j]
            g = abs(mi) - abs(mj)
            if di is not None and dj is not None:
                return g, batch_means_se(np.sign(mi) * di - np.sign(mj) * dj, n_batches)
            return g, math.hypot(si, sj)

        for i in range(len(signed) - 1):
            g, s = gap(i, i + 1)
            gaps.append(g)
            gap_se.append(s)
        if len(signed) >= 2:
            eg, es = gap(0, len(signed) - 1)
        else:
            eg, es = math.nan, math.nan
        summaries.append(
            ConvergenceSummary(
                key,
                tuple(others),
                tuple(abs(m) for m, _, _ in signed),
                tuple(gaps),
                tuple(gap_se),
                bool(gaps) and all(g > n_sigma * s for g, s in zip(gaps, gap_se)),
                eg,
                es,
                bool(len(signed) >= 2 and eg > n_sigma * es),
            )
        )
    return ConvergenceReport(lam0, tuple(rows), tuple(summaries))
