import itertools

import numpy as np
import pytest

from stochns.spectral import Lattice


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(params=[16, 64], ids=lambda n: f"N{n}")
def lattice(request):
    return Lattice(request.param)


def full_modes(field, cutoff=None):
    """All nonzero coefficients of ``field`` as {(k1, k2): a_k}, both members of each conjugate pair."""
    lat = field.lattice
    half = lat.N // 2 - 1 if cutoff is None else cutoff
    out = {}
    for k in itertools.product(range(-half, half + 1), repeat=2):
        if k == (0, 0):
            continue
        a = field.coefficient(k)
        if a != 0:
            out[k] = complex(a)
    return out


def unit_perp(k, L=2 * np.pi):
    """Basis vector i k^perp/|k| of the scalar representation."""
    kk = 2 * np.pi / L * np.asarray(k, dtype=float)
    return 1j * np.array([-kk[1], kk[0]]) / np.hypot(*kk)


def convolution_B(u, v, cutoff):
    """Brute-force Pi[(u . grad) v] by summing over all wavevector pairs.

    Independent of the FFT path: loops over every (p, q) with p + q = k.
    Returns {k: coefficient along i k^perp/|k|} for max(|k1|, |k2|) <= cutoff.
    """
    L = u.lattice.L
    um, vm = full_modes(u), full_modes(v)
    acc = {}
    for p, a in um.items():
        ep = unit_perp(p, L) * a
        for q, b in vm.items():
            k = (p[0] + q[0], p[1] + q[1])
            if k == (0, 0) or max(abs(k[0]), abs(k[1])) > cutoff:
                continue
            kq = 2 * np.pi / L * np.asarray(q, dtype=float)
            vec = (1j * (ep @ kq)) * b * unit_perp(q, L)
            acc[k] = acc.get(k, 0) + vec
    return {k: complex(np.conj(unit_perp(k, L)) @ vec) for k, vec in acc.items()}


_CRITERIA = {}


def record_criterion(number, title, passed, detail):
    """Store a one-line acceptance verdict for the terminal summary."""
    _CRITERIA[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")
