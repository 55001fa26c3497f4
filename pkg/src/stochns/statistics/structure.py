"""Longitudinal structure functions and scaling-exponent fits."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, FitError
from ..spectral import PhysicalField, SpectralField, hermitian_column, transform_to_physical

DIRECTIONS = {"x": (1, 0), "y": (0, 1), "diag": (1, 1)}


class StructureFunctionTable:
    """Space-time averages of longitudinal increment moments.

    Sums are kept per (direction, m) where m is the separation in grid steps
    along the direction, so tables from different snapshot batches merge by
    addition. Directions with the same physical separation (x and y) are
    pooled when values are read out; the diagonal contributes its own
    separations l = m h sqrt(2).
    """

    def __init__(self, lattice, orders=(2, 3, 4, 6), directions=("x", "y"), max_m=None):
        unknown = set(directions) - set(DIRECTIONS)
        if unknown:
            raise DomainError(f"unknown directions {sorted(unknown)}")
        self.lattice = lattice
        self.orders = tuple(int(p) for p in orders)
        self.directions = tuple(directions)
        self.max_m = lattice.N // 2 if max_m is None else int(max_m)
        shape = (len(self.directions), len(self.orders), self.max_m + 1)
        self.signed = np.zeros(shape)
        self.absolute = np.zeros(shape)
        self.counts = np.zeros((len(self.directions), self.max_m + 1), dtype=np.int64)

    def add(self, field):
        """Accumulate one snapshot (a SpectralField or its physical samples)."""
        phys = transform_to_physical(field) if isinstance(field, SpectralField) else field
        npts = phys.u1.size
        for di, name in enumerate(self.directions):
            e = np.asarray(DIRECTIONS[name], dtype=float)
            s = e / np.linalg.norm(e)
            comp = s[0] * phys.u1 + s[1] * phys.u2
            for m in range(1, self.max_m + 1):
                shifted = np.roll(comp, (-m * int(e[0]), -m * int(e[1])), axis=(0, 1))
                delta = shifted - comp
                for pi, p in enumerate(self.orders):
                    dp = delta**p
                    sp = float(np.sum(dp))
                    self.signed[di, pi, m] += sp
                    # even powers reuse the signed sum so both variants agree bitwise
                    self.absolute[di, pi, m] += sp if p % 2 == 0 else float(np.sum(np.abs(dp)))
            self.counts[di, 1:] += npts
            self.counts[di, 0] += npts
        return self

    @classmethod
    def from_function(cls, lattice, orders, func, directions=("x", "y"), max_m=None):
        """Table whose every entry is ``func(p, l)``, one sample per entry."""
        t = cls(lattice, orders, directions, max_m)
        for di in range(len(t.directions)):
            ls = t._l_of(di)
            for pi, p in enumerate(t.orders):
                t.signed[di, pi] = [func(p, l) if l > 0 else 0.0 for l in ls]
                t.absolute[di, pi] = np.abs(t.signed[di, pi])
        t.counts[:] = 1
        return t

    def merge(self, other):
        if (self.lattice, self.orders, self.directions, self.max_m) != (
            other.lattice,
            other.orders,
            other.directions,
            other.max_m,
        ):
            raise DomainError("structure-function tables with different layouts cannot be merged")
        out = StructureFunctionTable(self.lattice, self.orders, self.directions, self.max_m)
        out.signed = self.signed + other.signed
        out.absolute = self.absolute + other.absolute
        out.counts = self.counts + other.counts
        return out

    def _l_of(self, di):
        e = DIRECTIONS[self.directions[di]]
        return self.lattice.h * math.hypot(*e) * np.arange(self.max_m + 1)

    def values(self, p, variant="abs"):
        """(l, S^p(l), count) with directions of equal separation pooled; l = 0 included."""
        pi = self.orders.index(p)
        src = self.absolute if variant == "abs" else self.signed
        pooled = {}
        for di in range(len(self.directions)):
            for m, l in enumerate(self._l_of(di)):
                key = round(l / self.lattice.h, 9)
                s, c, lv = pooled.get(key, (0.0, 0, l))
                pooled[key] = (s + src[di, pi, m], c + int(self.counts[di, m]), lv)
        keys = sorted(pooled)
        ls = np.array([pooled[k][2] for k in keys])
        cs = np.array([pooled[k][1] for k in keys])
        ss = np.array([pooled[k][0] for k in keys])
        with np.errstate(invalid="ignore", divide="ignore"):
            vals = np.where(cs > 0, ss / np.maximum(cs, 1), 0.0)
        return ls, vals, cs

    def rows(self, field_name):
        """CSV rows (field, p, l, signed_S, abs_S, count)."""
        out = []
        for p in self.orders:
            ls, sv, cs = self.values(p, "signed")
            _, av, _ = self.values(p, "abs")
            out.extend((field_name, p, float(l), float(s), float(a), int(c)) for l, s, a, c in zip(ls, sv, av, cs))
        return out


def separation_steps(lattice, separations):
    """Map physical separations to grid steps, nearest grid point, warning when not exact."""
    steps = []
    for l in separations:
        m = int(round(l / lattice.h))
        if not math.isclose(m * lattice.h, l, rel_tol=1e-9, abs_tol=1e-12):
            warnings.warn(f"separation {l} is not a multiple of the grid spacing; using {m * lattice.h}", stacklevel=2)
        steps.append(m)
    return steps


def structure_functions(snapshots, orders=(2, 3, 4, 6), directions=("x", "y"), max_m=None):
    """Tables for u and w from a sequence of pair states."""
    snapshots = list(snapshots)
    if not snapshots:
        raise DomainError("at least one snapshot is required")
    lat = snapshots[0].u.lattice
    tu = StructureFunctionTable(lat, orders, directions, max_m)
    tw = StructureFunctionTable(lat, orders, directions, max_m)
    for s in snapshots:
        tu.add(s.u)
        tw.add(s.w)
    return tu, tw


@dataclass(frozen=True)
class ScalingFit:
    l_min: float
    l_max: float
    zeta: dict
    intercept: dict
    r2: dict
    stderr: dict
    residuals: dict

    def rows(self, field_name):
        return [(field_name, p, self.zeta[p], self.stderr[p], self.intercept[p], self.r2[p], self.l_min, self.l_max)
                for p in sorted(self.zeta)]


def scaling_fit(table, l_range=None, variant="abs", n_boot=200, seed=0):
    """Least-squares slope of log S^p against log l inside ``l_range``.

    Only positive entries are used. The standard error comes from a residual
    bootstrap with a fixed seed, so repeated fits are identical.
    """
    lat = table.lattice
    lo, hi = (4 * lat.h, lat.N * lat.h / 8) if l_range is None else l_range
    rng = np.random.default_rng(seed)
    zeta, icpt, r2, se, res = {}, {}, {}, {}, {}
    for p in table.orders:
        ls, vals, _ = table.values(p, variant)
        keep = (ls >= lo * (1 - 1e-12)) & (ls <= hi * (1 + 1e-12)) & (vals > 0)
        if keep.sum() < 4:
            usable = [float(l) for l in ls[keep]]
            raise FitError(f"order {p}: {len(usable)} usable separations in [{lo}, {hi}], need 4: {usable}")
        x, y = np.log(ls[keep]), np.log(vals[keep])
        design = np.column_stack([x, np.ones_like(x)])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        fitted = design @ coef
        r = y - fitted
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        boot = np.empty(n_boot)
        for b in range(n_boot):
            yb = fitted + rng.choice(r, size=r.size, replace=True)
            boot[b] = np.linalg.lstsq(design, yb, rcond=None)[0][0]
        zeta[p], icpt[p] = float(coef[0]), float(coef[1])
        r2[p] = 1.0 - float(np.sum(r**2)) / ss_tot if ss_tot > 0 else 1.0
        se[p] = float(boot.std(ddof=1)) if n_boot > 1 else 0.0
        res[p] = r
    return ScalingFit(float(lo), float(hi), zeta, icpt, r2, se, res)


def rescaling_check(fields_w, table_w, lam, rel_tol=1e-12):
    """Rebuild the table from lam * w and compare entry-wise with lam^p times ``table_w``.

    Returns (passed, worst relative deviation).
    """
    if lam == 0:
        raise DomainError("rescaling by zero is degenerate")
    scaled = StructureFunctionTable(table_w.lattice, table_w.orders, table_w.directions, table_w.max_m)
    for f in fields_w:
        scaled.add(f * lam)
    worst = 0.0
    for pi, p in enumerate(table_w.orders):
        # the absolute variant scales with |lam|^p
        for new, old, factor in (
            (scaled.signed, table_w.signed, lam**p),
            (scaled.absolute, table_w.absolute, abs(lam) ** p),
        ):
            ref = factor * old[:, pi]
            scale = abs(factor) * table_w.absolute[:, pi]
            dev = np.abs(new[:, pi] - ref)
            ok = scale > 0
            if np.any(dev[~ok] > 0):
                return False, math.inf
            if np.any(ok):
                worst = max(worst, float(np.max(dev[ok] / scale[ok])))
    return worst <= rel_tol, worst


def fractional_spectrum(lattice, hurst):
    """Variance E|a_k|^2 proportional to |k|^-(2H+2); zero mode and Nyquist modes excluded."""
    var = np.zeros(lattice.shape)
    mask = lattice.nonzero & ~lattice.nyquist_mask
    np.power(lattice.gamma, -(hurst + 1.0), out=var, where=mask)
    return var * mask


def synthetic_fractional_field(lattice, hurst, rng):
    """Gaussian divergence-free field whose second-order structure function scales as l^(2H)."""
    sd = np.sqrt(fractional_spectrum(lattice, hurst) / 2)
    c = (rng.standard_normal(lattice.shape) + 1j * rng.standard_normal(lattice.shape)) * sd
    return SpectralField(lattice, hermitian_column(c, lattice))


def synthetic_fractional_sample(lattice, hurst, rng, oversample=4):
    """Physical samples on ``lattice`` of a fractional field resolved on an ``oversample`` times finer grid.

    Sampling a finer field keeps the sub-grid increments that a spectrally
    truncated field lacks, so the small-separation end of the fit range is
    not steepened by the cutoff.
    """
    fine = type(lattice)(lattice.N * oversample, lattice.L)
    phys = transform_to_physical(synthetic_fractional_field(fine, hurst, rng))
    s = slice(None, None, oversample)
    return PhysicalField(lattice, phys.u1[s, s].copy(), phys.u2[s, s].copy())
