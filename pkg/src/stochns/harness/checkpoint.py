"""Self-describing binary checkpoints of the pair state.

Layout: 8 magic bytes, a little-endian uint32 header length, a UTF-8 JSON
header, then the u and w coefficient arrays as little-endian complex128 in
C order. The JSON header stores floats with full round-trip precision.
"""

import json
import struct

import numpy as np

from ..dynamics import PairState
from ..errors import ConfigError
from ..spectral import Lattice, SpectralField

MAGIC = b"STOCHNS\x00"
FORMAT_VERSION = 1
DTYPE = "<c16"


def header_for(state, cfg):
    lat = state.u.lattice
    return {
        "format_version": FORMAT_VERSION,
        "N": lat.N,
        "L": lat.L,
        "nu": cfg.nu,
        "lam": cfg.lam,
        "t": state.t,
        "step": state.step,
        "seed": cfg.seed,
        "replica": cfg.replica,
        "stream_tag": cfg.stream_tag,
        "stream_positions": {"W1": state.step, "W2": state.step},
        "noise_hash": cfg.noise.digest,
        "noise_w_hash": cfg.noise2.digest,
        "dtype": DTYPE,
        "shape": list(lat.shape),
    }


def dumps(state, cfg):
    head = json.dumps(header_for(state, cfg), sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(f.coeffs, dtype=DTYPE).tobytes() for f in (state.u, state.w))
    return MAGIC + struct.pack("<I", len(head)) + head + body


def save(path, state, cfg):
    with open(path, "wb") as fh:
        fh.write(dumps(state, cfg))
    return str(path)


def loads(blob):
    if blob[: len(MAGIC)] != MAGIC:
        raise ConfigError("not a checkpoint file (bad magic bytes)")
    (n,) = struct.unpack("<I", blob[len(MAGIC) : len(MAGIC) + 4])
    start = len(MAGIC) + 4
    header = json.loads(blob[start : start + n].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported checkpoint format {header.get('format_version')}")
    lat = Lattice(header["N"], header["L"])
    shape = tuple(header["shape"])
    size = int(np.prod(shape)) * 16
    body = blob[start + n :]
    if len(body) != 2 * size:
        raise ConfigError(f"checkpoint body has {len(body)} bytes, expected {2 * size}")
    u = np.frombuffer(body[:size], dtype=header["dtype"]).reshape(shape).astype(complex)
    w = np.frombuffer(body[size:], dtype=header["dtype"]).reshape(shape).astype(complex)
    state = PairState(SpectralField(lat, u), SpectralField(lat, w), header["t"], header["step"])
    return state, header


def load(path, cfg=None):
    """Read a checkpoint; with ``cfg`` given, refuse one written by an incompatible run."""
    with open(path, "rb") as fh:
        state, header = loads(fh.read())
    if cfg is not None:
        problems = []
        for key, want in (("N", cfg.N), ("L", cfg.L), ("noise_hash", cfg.noise.digest),
                          ("noise_w_hash", cfg.noise2.digest), ("seed", cfg.seed)):
            if header[key] != want:
                problems.append(f"checkpoint {key}={header[key]!r} does not match the configuration ({want!r})")
        if problems:
            raise ConfigError(problems)
    return state, header
