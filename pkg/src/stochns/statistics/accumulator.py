"""Mergeable time-series accumulators with batch-means error bars."""

import math

import numpy as np

from ..errors import InsufficientDataError


class StatsAccumulator:
    """Running moments plus the raw series of named scalar observables.

    The series is kept so batch means can be formed with any batch length at
    report time and so two accumulators merge exactly as if their samples had
    been streamed through one.
    """

    def __init__(self):
        self._series = {}
        self._moments = {}

    @classmethod
    def from_series(cls, series):
        """Accumulator holding the given ``{name: sequence}`` samples."""
        acc = cls()
        for name, values in series.items():
            for x in values:
                acc.add({name: x})
        return acc

    @property
    def names(self):
        return sorted(self._series)

    def __contains__(self, name):
        return name in self._series

    def add(self, values):
        for name, x in values.items():
            x = float(x)
            self._series.setdefault(name, []).append(x)
            n, mean, m2 = self._moments.get(name, (0, 0.0, 0.0))
            n += 1
            delta = x - mean
            mean += delta / n
            m2 += delta * (x - mean)
            self._moments[name] = (n, mean, m2)
        return self

    def merge(self, other):
        """Accumulator equivalent to streaming ``self``'s samples followed by ``other``'s."""
        out = StatsAccumulator()
        for name in set(self._series) | set(other._series):
            out._series[name] = self._series.get(name, []) + other._series.get(name, [])
            out._moments[name] = _chan(self._moments.get(name, (0, 0.0, 0.0)), other._moments.get(name, (0, 0.0, 0.0)))
        return out

    def count(self, name=None):
        if name is None:
            return max((m[0] for m in self._moments.values()), default=0)
        return self._moments.get(name, (0, 0.0, 0.0))[0]

    def mean(self, name):
        n, mean, _ = self._moment(name)
        return mean

    def variance(self, name):
        n, _, m2 = self._moment(name)
        return m2 / (n - 1) if n > 1 else 0.0

    def series(self, name):
        return np.asarray(self._series.get(name, []), dtype=float)

    def batch_se(self, name, n_batches=30, batch_length=None):
        return batch_means_se(self.series(name), n_batches, batch_length)

    def _moment(self, name):
        if self.count(name) == 0:
            raise InsufficientDataError(f"no samples of {name!r}")
        return self._moments[name]


def _chan(a, b):
    na, ma, m2a = a
    nb, mb, m2b = b
    n = na + nb
    if n == 0:
        return (0, 0.0, 0.0)
    if na == 0:
        return b
    if nb == 0:
        return a
    delta = mb - ma
    mean = ma + delta * nb / n
    return (n, mean, m2a + m2b + delta * delta * na * nb / n)


def batch_means_se(x, n_batches=30, batch_length=None):
    """Standard error of the mean of a correlated series by non-overlapping batch means.

    Trailing samples that do not fill a batch are dropped.
    """
    x = np.asarray(x, dtype=float)
    if batch_length is not None:
        n_batches = len(x) // batch_length
    else:
        batch_length = len(x) // n_batches if n_batches else 0
    if n_batches < 2 or batch_length < 1:
        raise InsufficientDataError(f"{len(x)} samples cannot form {n_batches} batches")
    b = x[: n_batches * batch_length].reshape(n_batches, batch_length).mean(axis=1)
    return float(b.std(ddof=1) / math.sqrt(n_batches))
