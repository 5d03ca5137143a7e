"""Structured run configuration: YAML in, YAML out, strict keys.

One file describes a whole run: the circuit, the truncation, the readout
settings, the flux sweep, and the optional jump / state-prep sections the
corresponding commands read.  Loading validates every value through the
owning dataclass, rejects keys it does not know at every nesting level,
and round-trips exactly (load -> dump -> load gives an equal config).
"""

import hashlib
from dataclasses import dataclass, field, fields

import yaml

from .circuit import DEFAULT_AREA_RATIO, CircuitParams, HilbertTruncation
from .errors import ConfigError, FluxsimError
from .readout import ReadoutSettings

#: bump when the schema changes shape
CONFIG_VERSION = 1


@dataclass(frozen=True)
class JumpSectionSettings:
    """Inputs of the jump-trace simulate/analyze commands."""

    gamma_up_per_us: float = 1.0 / 300.0
    gamma_down_per_us: float = 1.0 / 80.0
    snr: float = 3.0
    dt_ns: float = 100.0
    duration_ns: float = 5e7

    def __post_init__(self):
        if self.gamma_up_per_us < 0.0 or self.gamma_down_per_us < 0.0:
            raise ConfigError("jump rates must be nonnegative")
        if self.snr <= 0.0 or self.dt_ns <= 0.0 or self.duration_ns <= 0.0:
            raise ConfigError("snr, dt and duration must be positive")


@dataclass(frozen=True)
class StatePrepSectionSettings:
    """Inputs of the feedback state-preparation command.

    ``target`` may be ``g``, ``e`` or ``both``.  The initial thermal
    excited-state population is computed from ``f_ge_ghz`` and ``t_mk``;
    set ``t_mk`` to zero for a ground-state start.
    """

    target: str = "both"
    shots: int = 20_000
    snr: float = 3.0
    tau_m_ns: float = 560.0
    latency_ns: float = 428.0
    pi_pulse_duration_ns: float = 48.0
    pi_pulse_error: float = 0.01
    f_leakage: float = 0.01
    gamma_up_per_us: float = 1.0 / 300.0
    gamma_down_per_us: float = 1.0 / 20.0
    f_ge_ghz: float = 1.137874
    t_mk: float = 31.0

    def __post_init__(self):
        if self.target not in ("g", "e", "both"):
            raise ConfigError(
                f"target must be 'g', 'e' or 'both', got {self.target!r}")
        if self.shots < 1:
            raise ConfigError("shots must be at least 1")
        if self.t_mk < 0.0 or self.f_ge_ghz <= 0.0:
            raise ConfigError("temperature and transition must make sense")

    @property
    def targets(self):
        return ("g", "e") if self.target == "both" else (self.target,)


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs, validated and hashable."""

    circuit: CircuitParams = field(default_factory=CircuitParams)
    truncation: HilbertTruncation = field(
        default_factory=HilbertTruncation.default_normal)
    readout: ReadoutSettings = None
    flux_sweep: tuple = (29.0, 31.0, 100)
    seeds: tuple = (0,)
    output_dir: str = "out"
    area_ratio: float = DEFAULT_AREA_RATIO
    jumps: JumpSectionSettings = field(default_factory=JumpSectionSettings)
    state_prep: StatePrepSectionSettings = field(
        default_factory=StatePrepSectionSettings)

    def __post_init__(self):
        if self.readout is None:
            object.__setattr__(self, "readout", ReadoutSettings(
                kappa_mhz=1.16, f_r0_ghz=self.circuit.f_r0, n_bar=114.0,
                tau_m_ns=480.0, n_noise=15.8))
        start, stop, steps = self.flux_sweep
        if steps < 1:
            raise ConfigError(f"flux sweep needs at least 1 step, got {steps}")
        if not stop > start:
            raise ConfigError("flux sweep must run forward")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.area_ratio <= 0.0:
            raise ConfigError("area ratio must be positive")


def _build(cls, mapping, context, coerce=None):
    """Instantiate a dataclass from a mapping, rejecting unknown keys."""
    if mapping is None:
        mapping = {}
    if not isinstance(mapping, dict):
        raise ConfigError(f"{context}: expected a mapping, got "
                          f"{type(mapping).__name__}")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"{context}: unknown keys {unknown}")
    kwargs = dict(mapping)
    if coerce:
        for key, fn in coerce.items():
            if key in kwargs:
                kwargs[key] = fn(kwargs[key])
    try:
        return cls(**kwargs)
    except (ValueError, TypeError, FluxsimError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(f"{context}: {err}") from err


def loads_config(text):
    """Parse a YAML document into a :class:`RunConfig`."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"config is not valid YAML: {err}") from err
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")

    allowed = {"version", "circuit", "truncation", "readout", "flux_sweep",
               "seeds", "output_dir", "area_ratio", "jumps", "state_prep"}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"config: unknown keys {unknown}")
    version = raw.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"config version {version} is not supported "
                          f"(this build reads version {CONFIG_VERSION})")

    circuit = _build(CircuitParams, raw.get("circuit"), "circuit",
                     coerce={k: float for k in (
                         "L", "C", "L_r", "C_r", "L_s",
                         "E_J_prime", "E_J_dprime")})
    truncation = _build(
        HilbertTruncation,
        {"basis": "normal", **(raw.get("truncation") or {})}, "truncation",
        coerce={"n_res": int, "n_atom": int, "max_dim": int})

    readout_raw = dict(raw.get("readout") or {})
    readout_raw.setdefault("kappa_mhz", 1.16)
    readout_raw.setdefault("f_r0_ghz", circuit.f_r0)
    readout_raw.setdefault("n_bar", 114.0)
    readout_raw.setdefault("tau_m_ns", 480.0)
    readout_raw.setdefault("n_noise", 15.8)
    readout = _build(ReadoutSettings, readout_raw, "readout",
                     coerce={k: float for k in readout_raw})

    sweep_raw = raw.get("flux_sweep", [29.0, 31.0, 100])
    if not isinstance(sweep_raw, (list, tuple)) or len(sweep_raw) != 3:
        raise ConfigError("flux_sweep must be [start, stop, steps]")
    flux_sweep = (float(sweep_raw[0]), float(sweep_raw[1]),
                  int(sweep_raw[2]))

    seeds_raw = raw.get("seeds", [0])
    if not isinstance(seeds_raw, (list, tuple)):
        raise ConfigError("seeds must be a list of integers")
    seeds = tuple(int(s) for s in seeds_raw)

    return RunConfig(
        circuit=circuit,
        truncation=truncation,
        readout=readout,
        flux_sweep=flux_sweep,
        seeds=seeds,
        output_dir=str(raw.get("output_dir", "out")),
        area_ratio=float(raw.get("area_ratio", DEFAULT_AREA_RATIO)),
        jumps=_build(JumpSectionSettings, raw.get("jumps"), "jumps",
                     coerce={k: float for k in (
                         "gamma_up_per_us", "gamma_down_per_us", "snr",
                         "dt_ns", "duration_ns")}),
        state_prep=_build(
            StatePrepSectionSettings, raw.get("state_prep"), "state_prep",
            coerce={"shots": int, "target": str,
                    **{k: float for k in (
                        "snr", "tau_m_ns", "latency_ns",
                        "pi_pulse_duration_ns", "pi_pulse_error",
                        "f_leakage", "gamma_up_per_us", "gamma_down_per_us",
                        "f_ge_ghz", "t_mk")}}))


def load_config(path):
    """Read and parse a config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return loads_config(text)


def _as_mapping(config):
    c = config.circuit
    t = config.truncation
    r = config.readout
    j = config.jumps
    s = config.state_prep
    f = float
    return {
        "version": CONFIG_VERSION,
        "circuit": {"L": f(c.L), "C": f(c.C), "L_r": f(c.L_r),
                    "C_r": f(c.C_r), "L_s": f(c.L_s),
                    "E_J_prime": f(c.E_J_prime),
                    "E_J_dprime": f(c.E_J_dprime)},
        "truncation": {"n_res": int(t.n_res), "n_atom": int(t.n_atom),
                       "basis": str(t.basis), "max_dim": int(t.max_dim)},
        "readout": {"kappa_mhz": f(r.kappa_mhz), "f_r0_ghz": f(r.f_r0_ghz),
                    "n_bar": f(r.n_bar), "tau_m_ns": f(r.tau_m_ns),
                    "n_noise": f(r.n_noise),
                    "drive_detuning_mhz": f(r.drive_detuning_mhz)},
        "flux_sweep": [f(config.flux_sweep[0]), f(config.flux_sweep[1]),
                       int(config.flux_sweep[2])],
        "seeds": [int(x) for x in config.seeds],
        "output_dir": str(config.output_dir),
        "area_ratio": f(config.area_ratio),
        "jumps": {"gamma_up_per_us": f(j.gamma_up_per_us),
                  "gamma_down_per_us": f(j.gamma_down_per_us),
                  "snr": f(j.snr), "dt_ns": f(j.dt_ns),
                  "duration_ns": f(j.duration_ns)},
        "state_prep": {
            "target": str(s.target), "shots": int(s.shots), "snr": f(s.snr),
            "tau_m_ns": f(s.tau_m_ns), "latency_ns": f(s.latency_ns),
            "pi_pulse_duration_ns": f(s.pi_pulse_duration_ns),
            "pi_pulse_error": f(s.pi_pulse_error),
            "f_leakage": f(s.f_leakage),
            "gamma_up_per_us": f(s.gamma_up_per_us),
            "gamma_down_per_us": f(s.gamma_down_per_us),
            "f_ge_ghz": f(s.f_ge_ghz), "t_mk": f(s.t_mk)},
    }


def dump_config(config):
    """Serialize a config back to YAML in a stable key order."""
    return yaml.safe_dump(_as_mapping(config), sort_keys=False,
                          default_flow_style=False)


def save_config(config, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_config(config))


def config_hash(config):
    """Short stable digest of the full configuration, for provenance."""
    canonical = yaml.safe_dump(_as_mapping(config), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def default_config():
    return RunConfig()
