"""
Run configuration: immutable dataclasses validated on construction, the
sectioned config-file reader, sweep substitution and content fingerprints.
"""

import configparser
import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from .species import SpeciesError, get_species
from .units import TWO_PI, UnitError, hz_to_rad, parse_quantity
from .vapor import VaporError, cell_rates, rabi_from_power

VERSION = "0.1"
CONFIG_DIR = os.path.join(os.path.dirname(__file__), "configs")

FIELD_RATIO = 1e-2
ADIABATIC_FACTOR = 10.0
GEOMETRIES = ("parallel", "perpendicular")
PAIRINGS = ("same_probe", "orthogonal_probe")


class ConfigError(ValueError):
    "Exception raised for invalid or unknown configuration values."
    pass


@dataclass(frozen=True)
class FieldConfig:
    """
    Static field B0 (signed), RF amplitude B1 and auxiliary field Ba, all in T;
    tilt angle theta in rad.
    """

    B0: float
    B1: float = 0.0
    Ba: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if self.B0 == 0:
            raise ConfigError("B0 must be nonzero")
        if abs(self.B1) / abs(self.B0) >= FIELD_RATIO:
            raise ConfigError(
                "B1/B0 < %g violated (B1=%g T, B0=%g T)" % (FIELD_RATIO, self.B1, self.B0)
            )
        if self.Ba < 0 or self.Ba / abs(self.B0) >= FIELD_RATIO:
            raise ConfigError(
                "0 <= Ba/|B0| < %g violated (Ba=%g T, B0=%g T)"
                % (FIELD_RATIO, self.Ba, self.B0)
            )
        if abs(self.theta) > math.pi / 2 + 1e-12:
            raise ConfigError("|theta| <= 90 deg violated (theta=%g rad)" % self.theta)


@dataclass(frozen=True)
class PumpConfig:
    """
    Pump Rabi frequency and detuning in rad/s, helicity +1 (sigma+) or -1
    (sigma-). `power` (W) and `beam_diameter` (m) are kept when Omega was
    derived from them so that power sweeps can re-derive it.
    """

    rabi: float
    detuning: float = 0.0
    helicity: int = 1
    power: Optional[float] = None
    beam_diameter: Optional[float] = None

    def __post_init__(self):
        if self.rabi < 0:
            raise ConfigError("rabi >= 0 violated (rabi=%g rad/s)" % self.rabi)
        if self.helicity not in (1, -1):
            raise ConfigError("helicity must be +1 or -1, got %r" % (self.helicity,))

    @property
    def helicity_label(self):
        return "+" if self.helicity > 0 else "-"


@dataclass(frozen=True)
class RateConfig:
    "Collision rates in 1/s; they enter the generator unchanged."
    gamma_mix: float
    gamma_Q: float
    gamma_SD: float
    gamma_SE: float

    def __post_init__(self):
        for name in ("gamma_mix", "gamma_Q", "gamma_SD", "gamma_SE"):
            if getattr(self, name) < 0:
                raise ConfigError("%s >= 0 violated" % name)


@dataclass(frozen=True)
class EffectToggles:
    nlz: bool = True
    nuz: bool = True
    ls: bool = True


@dataclass(frozen=True)
class NumericsConfig:
    zeeman_mode: str = "perturbative"
    drive_form: str = "full"
    corotating_only: bool = False
    steady_state: str = "diagonal"
    damping: float = 0.5
    aitken: bool = False
    max_iterations: int = 10000
    tolerance: float = 1e-10
    root_tolerance: float = TWO_PI * 1e-3
    scan_points: int = 201

    def __post_init__(self):
        choices = dict(
            zeeman_mode=("perturbative", "exact"),
            drive_form=("full", "rwa"),
            steady_state=("diagonal", "full"),
        )
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                raise ConfigError("%s must be one of %s" % (key, ", ".join(allowed)))
        if not 0 < self.damping <= 1:
            raise ConfigError("0 < damping <= 1 violated")
        if self.tolerance <= 0 or self.root_tolerance <= 0:
            raise ConfigError("tolerances must be positive")
        if self.max_iterations < 1 or self.scan_points < 3:
            raise ConfigError("max_iterations >= 1 and scan_points >= 3 required")


def default_theta_grid():
    return tuple(np.deg2rad(np.arange(0.0, 80.0 + 1e-9, 5.0)))


@dataclass(frozen=True)
class AnalysisConfig:
    theta_grid: Tuple[float, ...] = field(default_factory=default_theta_grid)
    pairing: str = "same_probe"
    ba_list: Tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if self.pairing not in PAIRINGS:
            raise ConfigError("pairing must be one of %s" % ", ".join(PAIRINGS))


@dataclass(frozen=True)
class SimulationConfig:
    species: object
    field: FieldConfig
    pump: PumpConfig
    rates: RateConfig
    toggles: EffectToggles = EffectToggles()
    numerics: NumericsConfig = NumericsConfig()
    geometry: str = "parallel"
    analysis: AnalysisConfig = AnalysisConfig()

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ConfigError("geometry must be one of %s" % ", ".join(GEOMETRIES))
        damping = self.rates.gamma_Q + self.rates.gamma_mix
        if damping < ADIABATIC_FACTOR * self.pump.rabi:
            raise ConfigError(
                "gamma_Q + gamma_mix >= %g * rabi violated (%g < %g)"
                % (ADIABATIC_FACTOR, damping, ADIABATIC_FACTOR * self.pump.rabi)
            )

    def with_theta(self, theta):
        return replace(self, field=replace(self.field, theta=theta))

    def with_toggles(self, **toggles):
        return replace(self, toggles=replace(self.toggles, **toggles))

    def with_numerics(self, **numerics):
        return replace(self, numerics=replace(self.numerics, **numerics))

    def with_helicity(self, helicity):
        return replace(self, pump=replace(self.pump, helicity=helicity))


# Config-file reader.

REQUIRED = {("species", "name"), ("field", "B0"), ("pump", "helicity")}

KEYS = {
    "species": {
        "name": None,
        "nuclear_spin": None,
        "g_S": "number",
        "g_I": "number",
        "delta_S": "frequency",
        "delta_P": "frequency",
    },
    "field": {"B0": "field", "B1": "field", "Ba": "field", "theta": "angle"},
    "pump": {
        "helicity": None,
        "detuning": "frequency",
        "rabi": "frequency",
        "power": "power",
        "beam_diameter": "length",
    },
    "rates": {
        "gamma_mix": "rate",
        "gamma_Q": "rate",
        "gamma_SD": "rate",
        "gamma_SE": "rate",
    },
    "cell": {
        "temperature": "temperature",
        "n2_pressure": "pressure",
        "length": "length",
        "fill_temperature": "temperature",
    },
    "effects": {"nlz": bool, "nuz": bool, "ls": bool},
    "probe": {"geometry": None},
    "numerics": {
        "zeeman_mode": None,
        "drive_form": None,
        "corotating_only": bool,
        "steady_state": None,
        "damping": "number",
        "aitken": bool,
        "max_iterations": int,
        "tolerance": "number",
        "root_tolerance": "frequency",
        "scan_points": int,
    },
    "analysis": {
        "theta_start": "angle",
        "theta_stop": "angle",
        "theta_step": "angle",
        "pairing": None,
        "ba_list": "field",
    },
}


def parse_helicity(text):
    value = str(text).strip().lower()
    if value in ("+", "+1", "sigma+", "plus"):
        return 1
    if value in ("-", "-1", "sigma-", "minus"):
        return -1
    raise ConfigError("helicity must be '+' or '-', got %r" % (text,))


def resolve_config_path(path):
    "Accept a file path or the bare name of a bundled configuration."
    if os.path.isfile(path):
        return path
    bundled = os.path.join(CONFIG_DIR, path if path.endswith(".cfg") else path + ".cfg")
    if os.path.isfile(bundled):
        return bundled
    raise ConfigError("config file %r not found" % (path,))


def _read(parser):
    values = {}
    for section in parser.sections():
        if section not in KEYS:
            raise ConfigError("unknown section [%s]" % section)
        for key, raw in parser.items(section):
            if key not in KEYS[section]:
                raise ConfigError("unknown key [%s] %s" % (section, key))
            kind = KEYS[section][key]
            try:
                if kind is None:
                    value = raw.strip()
                elif kind is bool:
                    value = parser.getboolean(section, key)
                elif kind is int:
                    value = int(raw)
                elif kind == "number":
                    value = float(raw)
                elif section == "analysis" and key == "ba_list":
                    value = tuple(parse_quantity(v, kind) for v in raw.split(","))
                else:
                    value = parse_quantity(raw, kind)
            except (ValueError, UnitError) as err:
                raise ConfigError("[%s] %s: %s" % (section, key, err)) from err
            values[(section, key)] = value
    for section, key in sorted(REQUIRED):
        if (section, key) not in values:
            raise ConfigError("missing required key [%s] %s" % (section, key))
    return values


def _section(values, section):
    return {key: v for (sec, key), v in values.items() if sec == section}


def config_from_values(values):
    """
    Build a validated :class:`SimulationConfig` from parsed (section, key) values.

    Args:
        values (dict): mapping (section, key) -> value in base units

    Returns:
        :class:`SimulationConfig` : configuration

    Raises:
        ConfigError: missing, inconsistent or out-of-bound values
    """
    try:
        spec = _section(values, "species")
        name = spec.pop("name")
        if "nuclear_spin" in spec:
            num, _, den = spec.pop("nuclear_spin").partition("/")
            spec["twice_I"] = int(round(2 * float(num) / float(den or 1)))
        species = get_species(name, **spec)

        fld = _section(values, "field")
        theta_deg = fld.pop("theta", 0.0)
        if not 0.0 <= theta_deg <= 90.0:
            raise ConfigError("theta in [0, 90] deg violated (theta=%g deg)" % theta_deg)
        B0 = fld["B0"]
        field_cfg = FieldConfig(
            B0=B0,
            B1=fld.get("B1", 1e-4 * abs(B0)),
            Ba=fld.get("Ba", 0.0),
            theta=math.radians(theta_deg),
        )

        rates = _rates(species, values)

        pump = _section(values, "pump")
        helicity = parse_helicity(pump["helicity"])
        detuning = hz_to_rad(pump.get("detuning", 0.0))
        if "rabi" in pump:
            if "power" in pump:
                raise ConfigError("give either [pump] rabi or [pump] power, not both")
            rabi = hz_to_rad(pump["rabi"])
            power = beam = None
        elif "power" in pump and "beam_diameter" in pump:
            power, beam = pump["power"], pump["beam_diameter"]
            rabi = rabi_from_power(species, power, beam, rates)
        else:
            raise ConfigError("missing [pump] rabi (or power and beam_diameter)")
        if rabi <= 0:
            raise ConfigError("rabi > 0 violated")
        pump_cfg = PumpConfig(rabi, detuning, helicity, power, beam)

        toggles = EffectToggles(**_section(values, "effects"))
        numerics = _section(values, "numerics")
        if "root_tolerance" in numerics:
            numerics["root_tolerance"] = hz_to_rad(numerics["root_tolerance"])
        numerics_cfg = NumericsConfig(**numerics)

        geometry = values.get(("probe", "geometry"), "parallel")
        analysis_cfg = _analysis(_section(values, "analysis"))
        return SimulationConfig(
            species, field_cfg, pump_cfg, rates, toggles, numerics_cfg, geometry, analysis_cfg
        )
    except (SpeciesError, VaporError) as err:
        raise ConfigError(str(err)) from err


def _rates(species, values):
    rates = _section(values, "rates")
    cell = _section(values, "cell")
    if rates and cell:
        raise ConfigError("give either [rates] or [cell], not both")
    if cell:
        missing = {"temperature", "n2_pressure", "length"} - set(cell)
        if missing:
            raise ConfigError("missing [cell] %s" % ", ".join(sorted(missing)))
        return RateConfig(**cell_rates(species, **_cell_arguments(cell)))
    missing = {"gamma_mix", "gamma_Q", "gamma_SD", "gamma_SE"} - set(rates)
    if missing:
        raise ConfigError("missing [rates] %s" % ", ".join(sorted(missing)))
    return RateConfig(**rates)


def _cell_arguments(cell):
    args = dict(
        temperature=cell["temperature"],
        n2_pressure=cell["n2_pressure"],
        cell_length=cell["length"],
    )
    if "fill_temperature" in cell:
        args["fill_temperature"] = cell["fill_temperature"]
    return args


def _analysis(section):
    start = section.get("theta_start", 0.0)
    stop = section.get("theta_stop", 80.0)
    step = section.get("theta_step", 5.0)
    if step <= 0 or stop < start or start < 0 or stop > 90:
        raise ConfigError("theta grid needs 0 <= theta_start <= theta_stop <= 90, step > 0")
    grid = tuple(np.deg2rad(np.arange(start, stop + 1e-9, step)))
    return AnalysisConfig(
        theta_grid=grid,
        pairing=section.get("pairing", "same_probe"),
        ba_list=section.get("ba_list", (0.0,)),
    )


def parse_config(path):
    """
    Read and validate a sectioned configuration file.

    Args:
        path (str): file path, or name of a bundled config such as ``"rb85_55uT"``

    Returns:
        :class:`SimulationConfig` : validated configuration

    Raises:
        ConfigError: unreadable file, unknown key, missing key or violated bound
    """
    parser = configparser.ConfigParser(
        comment_prefixes=("#",), inline_comment_prefixes=("#",), interpolation=None
    )
    parser.optionxform = str
    resolved = resolve_config_path(path)
    try:
        with open(resolved, encoding="utf-8") as handle:
            parser.read_file(handle)
    except configparser.Error as err:
        raise ConfigError("%s: %s" % (resolved, err)) from err
    return config_from_values(_read(parser))


# Sweeps.

SWEEP_AXES = {
    "theta": "angle",
    "detuning": "frequency",
    "B0": "field",
    "Ba": "field",
    "pump_power": "power",
    "helicity": None,
    "geometry": None,
}


def apply_sweep_value(config, axis, value):
    """
    Substitute one sweep-axis value into a configuration.

    Args:
        config (:class:`SimulationConfig`): base configuration
        axis (str): one of :data:`SWEEP_AXES`
        value: base-unit value (deg for theta, Hz for detuning, T, W) or label

    Returns:
        :class:`SimulationConfig` : new configuration

    Raises:
        ConfigError: unknown axis or value violating an invariant
    """
    if axis == "theta":
        return config.with_theta(math.radians(value))
    if axis == "detuning":
        return replace(config, pump=replace(config.pump, detuning=hz_to_rad(value)))
    if axis == "B0":
        return replace(config, field=replace(config.field, B0=value))
    if axis == "Ba":
        return replace(config, field=replace(config.field, Ba=value))
    if axis == "pump_power":
        if config.pump.beam_diameter is None:
            raise ConfigError("pump_power sweep needs [pump] beam_diameter")
        try:
            rabi = rabi_from_power(config.species, value, config.pump.beam_diameter, config.rates)
        except VaporError as err:
            raise ConfigError(str(err)) from err
        return replace(config, pump=replace(config.pump, rabi=rabi, power=value))
    if axis == "helicity":
        return config.with_helicity(parse_helicity(value))
    if axis == "geometry":
        return replace(config, geometry=value)
    raise ConfigError("unknown sweep axis %r" % (axis,))


def config_to_dict(config):
    return dataclasses.asdict(config)


def config_fingerprint(config):
    "SHA-256 over the canonical JSON form of the config and the library version."
    payload = json.dumps(
        {"config": config_to_dict(config), "version": VERSION}, sort_keys=True, default=str
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
