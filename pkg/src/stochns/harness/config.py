"""TOML run configuration with a closed schema.

Sections: ``simulation``, ``noise``, ``noise_w`` (optional, forcing of the
second component), ``statistics`` and ``sweep``. Unknown sections or keys
are errors, and every problem in a file is reported at once.
"""

import math
from dataclasses import dataclass, field, fields, replace

import tomli
import tomli_w

from ..dynamics import SimulationConfig
from ..errors import ConfigError, StochNSError
from ..forcing import NoiseModel, lowest_shells
from ..spectral import Lattice

NUMBER = (int, float)


@dataclass(frozen=True)
class SimulationSection:
    N: int = 64
    L: float = 2 * math.pi
    nu: float = 0.02
    lam: float = 0.0
    dt: float = 0.02
    T: float = 100.0
    seed: int = 0
    burn_in: object = "auto"
    observe_every: int = 5
    checkpoints: int = 10
    nonlinear: bool = True


@dataclass(frozen=True)
class NoiseSection:
    kind: str = "finite_band"
    shells: int = 4
    modes: tuple = ()
    q: float = 0.001
    amplitude: float = 1.0
    exponent: float = 1.5
    cutoff: int = 0


@dataclass(frozen=True)
class StatisticsSection:
    p_list: tuple = (2, 4)
    n_batches: int = 30
    track_transfer: bool = False
    s2_separations: tuple = (2, 4, 8)
    structure_orders: tuple = (2, 3, 4, 6)
    directions: tuple = ("x", "y")
    fit_range: tuple = ()


@dataclass(frozen=True)
class SweepSection:
    lambdas: tuple = (0.4, 0.2, 0.1)
    lam0: float = 0.0
    replicas: int = 1
    shared_noise: bool = True
    panel: tuple = ("pair_V", "u_V", "u_H")


@dataclass(frozen=True)
class RunConfig:
    simulation: SimulationSection = field(default_factory=SimulationSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    noise_w: NoiseSection = None
    statistics: StatisticsSection = field(default_factory=StatisticsSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    # derived objects ----------------------------------------------------

    @property
    def lattice(self):
        return Lattice(self.simulation.N, self.simulation.L)

    def noise_model(self, which="noise"):
        sec = getattr(self, which)
        if sec is None:
            return None
        return build_noise(self.lattice, sec)

    def burn_in_time(self):
        """Burn-in duration; ``"auto"`` gives min(0.2 T, 50 eddy turnovers).

        The turnover time is 1/sqrt(<||u||_V^2>) with the stationary enstrophy
        of one component, TrQ/(2 nu), which is known exactly.
        """
        s = self.simulation
        if s.burn_in != "auto":
            return float(s.burn_in)
        tq = self.noise_model().trace_q
        if tq <= 0:
            return 0.2 * s.T
        tau = 1.0 / math.sqrt(tq / (2 * s.nu))
        return min(0.2 * s.T, 50 * tau)

    def simulation_config(self, **overrides):
        s = self.simulation
        n_steps = int(round(s.T / s.dt))
        every = max(1, n_steps // s.checkpoints) if s.checkpoints > 0 else 0
        cfg = SimulationConfig(
            nu=s.nu,
            lam=s.lam,
            dt=s.dt,
            T=s.T,
            noise=self.noise_model(),
            noise_w=self.noise_model("noise_w"),
            seed=s.seed,
            burn_in=self.burn_in_time(),
            observe_every=s.observe_every,
            checkpoint_every=every,
            nonlinear=s.nonlinear,
        )
        return replace(cfg, **overrides) if overrides else cfg

    def with_seed(self, seed):
        return replace(self, simulation=replace(self.simulation, seed=int(seed)))

    def to_dict(self):
        out = {}
        for f in fields(self):
            sec = getattr(self, f.name)
            if sec is None:
                continue
            out[f.name] = {k.name: _plain(getattr(sec, k.name)) for k in fields(sec)}
        return out

    def dumps(self):
        return tomli_w.dumps(self.to_dict())


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


SECTIONS = {
    "simulation": SimulationSection,
    "noise": NoiseSection,
    "noise_w": NoiseSection,
    "statistics": StatisticsSection,
    "sweep": SweepSection,
}


def _check_type(where, value, default):
    """Problem string or None; ints are accepted where floats are expected."""
    if isinstance(default, bool):
        ok = isinstance(value, bool)
        want = "a boolean"
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
        want = "an integer"
    elif isinstance(default, float):
        ok = isinstance(value, NUMBER) and not isinstance(value, bool)
        want = "a number"
    elif isinstance(default, str):
        ok = isinstance(value, str)
        want = "a string"
    elif isinstance(default, tuple):
        ok = isinstance(value, (list, tuple))
        want = "a list"
    else:
        ok = True
        want = ""
    return None if ok else f"{where} must be {want}, got {value!r}"


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def from_dict(data):
    """Validate a parsed TOML document and build a RunConfig."""
    problems = []
    built = {}
    for name in data:
        if name not in SECTIONS:
            problems.append(f"unknown section [{name}]")
    for name, cls in SECTIONS.items():
        raw = data.get(name)
        if raw is None:
            if name != "noise_w":
                built[name] = cls()
            continue
        if not isinstance(raw, dict):
            problems.append(f"[{name}] must be a table")
            continue
        defaults = cls()
        kwargs = {}
        for key, value in raw.items():
            if not hasattr(defaults, key):
                problems.append(f"unknown key {name}.{key}")
                continue
            default = getattr(defaults, key)
            if name == "simulation" and key == "burn_in":
                if not (value == "auto" or (isinstance(value, NUMBER) and not isinstance(value, bool))):
                    problems.append(f"simulation.burn_in must be a number or \"auto\", got {value!r}")
                    continue
            else:
                p = _check_type(f"{name}.{key}", value, default)
                if p:
                    problems.append(p)
                    continue
            if isinstance(default, float) and isinstance(value, int):
                value = float(value)
            kwargs[key] = _freeze(value)
        built[name] = cls(**kwargs)
    if not problems:
        problems.extend(_semantic_problems(built))
    if problems:
        raise ConfigError(problems)
    return RunConfig(**built)


def _semantic_problems(b):
    out = []
    s = b["simulation"]
    if s.N < 16 or s.N % 2:
        out.append(f"simulation.N must be even and >= 16, got {s.N}")
    if not s.L > 0:
        out.append(f"simulation.L must be positive, got {s.L}")
    if not s.nu > 0:
        out.append(f"simulation.nu must be positive, got {s.nu}")
    if not s.dt > 0:
        out.append(f"simulation.dt must be positive, got {s.dt}")
    if not s.T >= s.dt:
        out.append(f"simulation.T must be at least one step (dt={s.dt}), got {s.T}")
    if s.observe_every < 1:
        out.append("simulation.observe_every must be >= 1")
    if s.checkpoints < 0:
        out.append("simulation.checkpoints must be >= 0")
    if s.burn_in != "auto" and not 0 <= s.burn_in <= s.T:
        out.append(f"simulation.burn_in must lie in [0, T], got {s.burn_in}")
    lattice = None
    if not any(p.startswith("simulation.N") or p.startswith("simulation.L") for p in out):
        try:
            lattice = Lattice(s.N, s.L)
        except StochNSError as exc:
            out.append(f"simulation.N: {exc}")
    for name in ("noise", "noise_w"):
        sec = b.get(name)
        if sec is None:
            continue
        if sec.kind not in ("finite_band", "power_law", "zero"):
            out.append(f"{name}.kind must be finite_band, power_law or zero, got {sec.kind!r}")
            continue
        if lattice is not None:
            try:
                build_noise(lattice, sec, prefix=name)
            except ConfigError as exc:
                out.extend(exc.problems)
    st = b["statistics"]
    if any((not isinstance(p, int)) or p < 2 for p in st.p_list):
        out.append(f"statistics.p_list entries must be integers >= 2, got {list(st.p_list)}")
    if st.n_batches < 2:
        out.append("statistics.n_batches must be >= 2")
    if any((not isinstance(m, int)) or m < 1 for m in st.s2_separations):
        out.append("statistics.s2_separations must be positive grid offsets")
    if any((not isinstance(p, int)) or p < 1 for p in st.structure_orders):
        out.append("statistics.structure_orders must be positive integers")
    bad_dir = [d for d in st.directions if d not in ("x", "y", "diag")]
    if bad_dir:
        out.append(f"statistics.directions has unknown entries {bad_dir}")
    if st.fit_range and (len(st.fit_range) != 2 or not 0 < st.fit_range[0] < st.fit_range[1]):
        out.append(f"statistics.fit_range must be [l_min, l_max] with 0 < l_min < l_max, got {list(st.fit_range)}")
    sw = b["sweep"]
    if sw.replicas < 1:
        out.append("sweep.replicas must be >= 1")
    if any(not isinstance(l, NUMBER) for l in sw.lambdas):
        out.append("sweep.lambdas must be numbers")
    return out


def build_noise(lattice, sec, prefix="noise"):
    if sec.kind == "zero":
        return NoiseModel.zero(lattice)
    if sec.kind == "power_law":
        return NoiseModel.power_law(lattice, sec.amplitude, sec.exponent, sec.cutoff or None)
    if sec.q < 0:
        raise ConfigError(f"{prefix}.q must be nonnegative, got {sec.q}")
    if sec.modes:
        try:
            modes = [(int(a), int(b)) for a, b in sec.modes]
        except (TypeError, ValueError):
            raise ConfigError(f"{prefix}.modes must be a list of [k1, k2] pairs") from None
    else:
        if sec.shells < 1:
            raise ConfigError(f"{prefix}.shells must be >= 1")
        modes = lowest_shells(lattice, sec.shells)
    return NoiseModel.finite_band(lattice, modes, sec.q)


def loads(text):
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from None
    return from_dict(data)


def load(path):
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return loads(text)
