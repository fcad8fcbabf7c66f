"""System parameters: laser, atmosphere, optics, sensor, acquisition.

Every quantity is SI. The INI layout mirrors the dataclasses one section per
spec, e.g.::

    [laser]
    pulse_energy = 1e-9      ; J
    rep_rate = 2.25e6        ; Hz

Unknown keys and missing required keys are configuration errors. The run
``seed`` is mandatory; nothing is ever auto-seeded.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError, DomainError

PRESETS = ("table1_resolution_target", "table2_landrover")


def _require(cond, message):
    if not cond:
        raise DomainError(message)


@dataclass(frozen=True)
class LaserSpec:
    pulse_energy: float  # J
    rep_rate: float  # Hz
    wavelength: float  # m
    pulse_fwhm: float  # s, impulse-response FWHM
    jitter_mean: float = 0.0  # s
    jitter_std: float = 0.0  # s

    def __post_init__(self):
        _require(self.pulse_energy >= 0, "pulse_energy must be >= 0")
        _require(self.rep_rate >= 0, "rep_rate must be >= 0")
        _require(self.wavelength > 0, "wavelength must be > 0")
        _require(self.pulse_fwhm > 0, "pulse_fwhm must be > 0")
        _require(self.jitter_mean >= 0, "jitter_mean must be >= 0")
        _require(self.jitter_std >= 0, "jitter_std must be >= 0")


@dataclass(frozen=True)
class AtmosphereSpec:
    attenuation_length: float  # m
    solar_irradiance: float = 0.0  # W/m^2 at the laser wavelength

    def __post_init__(self):
        _require(self.attenuation_length > 0, "attenuation_length must be > 0")
        _require(self.solar_irradiance >= 0, "solar_irradiance must be >= 0")


@dataclass(frozen=True)
class OpticsSpec:
    f_number: float
    divergence: float  # rad, half-angle: the beam spot radius is R*tan(divergence)
    focal_length: float | None = None  # m, cancels out of the photon count

    def __post_init__(self):
        _require(self.f_number > 0, "f_number must be > 0")
        _require(0 < self.divergence < math.pi / 2, "divergence must lie in (0, pi/2)")
        if self.focal_length is not None:
            _require(self.focal_length > 0, "focal_length must be > 0")


@dataclass(frozen=True)
class SensorSpec:
    pixel_width: float  # m, effective (pitch x fill factor)
    pixel_height: float  # m
    quantum_efficiency: float
    dark_rate: float  # Hz
    n_bins: int
    bin_width: float  # s
    rows: int = 1
    cols: int = 1
    sigma_q_start: float = 0.0  # s, trigger skew std at column 0
    sigma_q_end: float = 0.0  # s, trigger skew std at the last column
    gate_delay: float = 0.0  # s, round-trip time at the start of the TCSPC window

    def __post_init__(self):
        _require(self.pixel_width > 0 and self.pixel_height > 0, "pixel dimensions must be > 0")
        _require(0 <= self.quantum_efficiency <= 1, "quantum_efficiency must lie in [0, 1]")
        _require(self.dark_rate >= 0, "dark_rate must be >= 0")
        _require(int(self.n_bins) == self.n_bins and self.n_bins >= 1, "n_bins must be an integer >= 1")
        _require(self.bin_width > 0, "bin_width must be > 0")
        _require(self.rows >= 1 and self.cols >= 1, "rows and cols must be >= 1")
        _require(self.sigma_q_start >= 0 and self.sigma_q_end >= 0, "sigma_q endpoints must be >= 0")
        _require(self.gate_delay >= 0, "gate_delay must be >= 0")

    @property
    def window(self) -> float:
        """Total TCSPC interval, ``n_bins * bin_width``."""
        return self.n_bins * self.bin_width


@dataclass(frozen=True)
class TargetPatch:
    range: float  # m
    reflectivity: float

    def __post_init__(self):
        _require(self.range > 0, "range must be > 0")
        _require(0 <= self.reflectivity <= 1, "reflectivity must lie in [0, 1]")


@dataclass(frozen=True)
class AcquisitionSpec:
    frames: int
    exposure: float  # s
    rep_rate: float  # Hz

    def __post_init__(self):
        _require(int(self.frames) == self.frames and self.frames >= 1, "frames must be an integer >= 1")
        _require(self.exposure > 0, "exposure must be > 0")
        _require(self.exposure * self.rep_rate >= 1 - 1e-9, "exposure * rep_rate must be >= 1 pulse")

    @property
    def pulses_per_frame(self) -> int:
        return int(round(self.exposure * self.rep_rate))

    def with_frames(self, frames: int) -> "AcquisitionSpec":
        return dataclasses.replace(self, frames=frames)


@dataclass(frozen=True)
class Tolerances:
    quadrature_rel: float = 1e-6
    edge_sigma_guard: float = 5.0
    max_evaluations: int = 1_000_000


@dataclass(frozen=True)
class SystemConfig:
    laser: LaserSpec
    atmosphere: AtmosphereSpec
    optics: OpticsSpec
    sensor: SensorSpec
    frames: int
    exposure: float
    seed: int
    tolerances: Tolerances = field(default_factory=Tolerances)
    target: TargetPatch | None = None

    def __post_init__(self):
        # validates frames/exposure against the laser rep rate
        self.acquisition  # noqa: B018

    @property
    def acquisition(self) -> AcquisitionSpec:
        return AcquisitionSpec(self.frames, self.exposure, self.laser.rep_rate)

    def replace(self, **sections) -> "SystemConfig":
        """Copy with whole sections or individual fields swapped.

        ``cfg.replace(optics={"f_number": 4})`` updates one field of a section.
        """
        updates = {}
        for name, value in sections.items():
            if isinstance(value, dict):
                value = dataclasses.replace(getattr(self, name), **value)
            updates[name] = value
        return dataclasses.replace(self, **updates)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form; identifies the config in outputs."""
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()


# INI handling ---------------------------------------------------------------

_SECTIONS = {
    "laser": LaserSpec,
    "atmosphere": AtmosphereSpec,
    "optics": OpticsSpec,
    "sensor": SensorSpec,
    "target": TargetPatch,
    "tolerances": Tolerances,
}
_INT_FIELDS = {"n_bins", "rows", "cols", "frames", "max_evaluations", "seed"}


def _parse_value(section, key, text):
    try:
        if key in _INT_FIELDS:
            as_float = float(text)
            if as_float != int(as_float):
                raise ValueError
            return int(as_float)
        if text.strip().lower() in ("", "none"):
            return None
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse {text!r} as a number", f"{section}.{key}") from None


def _build_section(section, cls, items):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, text in items.items():
        if key not in known:
            raise ConfigError("unknown key", f"{section}.{key}")
        kwargs[key] = _parse_value(section, key, text)
    for name, f in known.items():
        required = f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
        if required and name not in kwargs:
            raise ConfigError("missing required field", f"{section}.{name}")
    try:
        return cls(**kwargs)
    except DomainError as exc:
        raise ConfigError(str(exc), section) from None


def parse_config(text: str) -> SystemConfig:
    """Parse INI text into a validated :class:`SystemConfig`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    allowed = set(_SECTIONS) | {"acquisition", "run"}
    for name in parser.sections():
        if name not in allowed:
            raise ConfigError("unknown section", name)
    for name in ("laser", "atmosphere", "optics", "sensor", "acquisition", "run"):
        if not parser.has_section(name):
            raise ConfigError("missing section", name)

    parts = {}
    for name, cls in _SECTIONS.items():
        if parser.has_section(name):
            parts[name] = _build_section(name, cls, dict(parser[name]))

    acq = dict(parser["acquisition"])
    run = dict(parser["run"])
    for key, where in (("frames", acq), ("exposure", acq)):
        if key not in where:
            raise ConfigError("missing required field", f"acquisition.{key}")
    extra = set(acq) - {"frames", "exposure"}
    if extra:
        raise ConfigError("unknown key", f"acquisition.{sorted(extra)[0]}")
    if "seed" not in run:
        raise ConfigError("missing required field (runs are never auto-seeded)", "run.seed")
    extra = set(run) - {"seed"}
    if extra:
        raise ConfigError("unknown key", f"run.{sorted(extra)[0]}")

    try:
        return SystemConfig(
            laser=parts["laser"],
            atmosphere=parts["atmosphere"],
            optics=parts["optics"],
            sensor=parts["sensor"],
            frames=_parse_value("acquisition", "frames", acq["frames"]),
            exposure=_parse_value("acquisition", "exposure", acq["exposure"]),
            seed=_parse_value("run", "seed", run["seed"]),
            tolerances=parts.get("tolerances", Tolerances()),
            target=parts.get("target"),
        )
    except DomainError as exc:
        raise ConfigError(str(exc), "acquisition") from None


def load_config(path) -> SystemConfig:
    return parse_config(Path(path).read_text())


def load_preset(name: str) -> SystemConfig:
    """Load one of the shipped presets by name (see :data:`PRESETS`)."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("spadsim.presets").joinpath(f"{name}.ini").read_text()
    return parse_config(text)


def dump_config(cfg: SystemConfig) -> str:
    """Serialize to INI text that :func:`parse_config` reads back unchanged."""
    lines = []
    for name in ("laser", "atmosphere", "optics", "sensor", "target", "tolerances"):
        section = getattr(cfg, name)
        if section is None:
            continue
        lines.append(f"[{name}]")
        for f in dataclasses.fields(section):
            lines.append(f"{f.name} = {getattr(section, f.name)!r}")
        lines.append("")
    lines += ["[acquisition]", f"frames = {cfg.frames}", f"exposure = {cfg.exposure!r}", ""]
    lines += ["[run]", f"seed = {cfg.seed}", ""]
    return "\n".join(lines)
