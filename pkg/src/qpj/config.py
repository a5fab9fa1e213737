"""INI run configuration in laboratory units and its conversion to reduced units."""
from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import MISSING, asdict, dataclass, field, fields
from importlib import resources

from .errors import ConfigError, ValidationError
from .junction import DriveParams
from .material import LeadParams
from .polarization import JunctionParams
from .resonator import ResonatorCircuit
from .units import MEV, UnitSystem

TASKS = ("polarization", "admittance", "spectrum", "qtemp-map", "montecarlo")


@dataclass(frozen=True)
class JunctionSI:
    gap_left_mev: float
    gap_right_mev: float
    resistance_kohm: float
    temperature_k: float
    temperature_right_k: float | None = None
    dynes_mev: float = 0.0


@dataclass(frozen=True)
class DriveSI:
    amplitude_mv: float
    frequency_ghz: float
    phase_bias_pi: float = 0.0


@dataclass(frozen=True)
class CircuitSI:
    capacitance_ff: float
    inductance_nh: float
    coupling_capacitance_ff: float = 1.0
    probe_impedance_ohm: float = 50.0
    probe_temperature_k: float | None = None


@dataclass(frozen=True)
class Numerics:
    rel_tol: float = 1e-9
    table_step: float = 0.01
    table_coarse_step: float = 0.02
    table_omega_max: float = 6.0
    omega_min: float = -3.0
    omega_max: float = 3.0
    omega_points: int = 601
    spectrum_points: int = 2001
    sweep_freq_min_ghz: float = 29.0
    sweep_freq_max_ghz: float = 36.0
    sweep_freq_points: int = 20
    sweep_amp_min_mv: float = 0.1
    sweep_amp_max_mv: float = 0.3
    sweep_amp_points: int = 20
    qtemp_min_k: float = 1e-3
    qtemp_max_k: float = 10.0
    qtemp_tol_k: float = 1e-4
    mc_trajectories: int = 200
    mc_dt: float = 1.0
    mc_memory: float = 500.0
    mc_segments: int = 2
    mc_transient: float = 10.0
    mc_segment: float = 4.0
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    junction: JunctionSI
    drive: DriveSI
    circuit: CircuitSI
    numerics: Numerics = field(default_factory=Numerics)
    task: str | None = None

    def digest(self) -> str:
        data = asdict(self)
        data.pop("task")
        blob = json.dumps(data, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ReducedParams:
    """Internal parameter set; see :mod:`qpj.units` for the unit system."""

    junction: JunctionParams
    drive: DriveParams
    circuit: ResonatorCircuit
    units: UnitSystem


_SECTIONS = {"junction": JunctionSI, "drive": DriveSI, "circuit": CircuitSI, "numerics": Numerics}
_POSITIVE = {"gap_left_mev", "gap_right_mev", "resistance_kohm", "capacitance_ff", "inductance_nh",
             "probe_impedance_ohm", "mc_dt", "mc_memory", "rel_tol", "table_step", "table_coarse_step",
             "table_omega_max", "qtemp_min_k", "qtemp_max_k", "qtemp_tol_k"}
_NON_NEGATIVE = {"temperature_k", "temperature_right_k", "dynes_mev", "amplitude_mv",
                 "coupling_capacitance_ff", "probe_temperature_k"}


def _required(cls):
    return [f.name for f in fields(cls) if f.default is MISSING and f.default_factory is MISSING]


def _convert(cls, name, text, problems, section):
    ftype = {f.name: f.type for f in fields(cls)}[name]
    try:
        if "int" in str(ftype) and "float" not in str(ftype):
            val = int(text)
        else:
            val = float(text)
    except ValueError:
        problems.append(f"[{section}] {name}: not a number: {text!r}")
        return None
    if isinstance(val, float) and not math.isfinite(val):
        problems.append(f"[{section}] {name}: must be finite")
    if name in _POSITIVE and not val > 0:
        problems.append(f"[{section}] {name}: must be positive")
    if name in _NON_NEGATIVE and not val >= 0:
        problems.append(f"[{section}] {name}: must be non-negative")
    return val


def parse_config_text(text: str, task: str | None = None) -> RunConfig:
    """Parse INI text. All problems are collected before raising.

    Raises
    ------
    ConfigError
        If the text is not valid INI.
    ValidationError
        If keys are missing, unknown, or out of range.
    """
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from exc
    problems = []
    for section in parser.sections():
        if section not in _SECTIONS:
            problems.append(f"unknown section [{section}]")
    values = {}
    for section, cls in _SECTIONS.items():
        known = {f.name for f in fields(cls)}
        got = {}
        if parser.has_section(section):
            for key, raw in parser.items(section):
                if key not in known:
                    problems.append(f"[{section}] unknown key {key!r}")
                    continue
                val = _convert(cls, key, raw.strip(), problems, section)
                if val is not None:
                    got[key] = val
        for name in _required(cls):
            if name not in got:
                problems.append(f"[{section}] missing required key {name!r}")
        values[section] = got
    if task is not None and task not in TASKS:
        problems.append(f"unknown task {task!r}")
    if problems:
        raise ValidationError(problems)
    num = values["numerics"]
    if num.get("qtemp_min_k", 1e-3) >= num.get("qtemp_max_k", 10.0):
        raise ValidationError(["[numerics] qtemp_min_k must be below qtemp_max_k"])
    return RunConfig(JunctionSI(**values["junction"]), DriveSI(**values["drive"]),
                     CircuitSI(**values["circuit"]), Numerics(**num), task)


def parse_config(path, task: str | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    return parse_config_text(text, task)


def default_config_text() -> str:
    return resources.files("qpj").joinpath("data/default.ini").read_text()


def default_config() -> RunConfig:
    return parse_config_text(default_config_text())


def units_of(cfg: RunConfig) -> UnitSystem:
    j = cfg.junction
    return UnitSystem.from_mev(j.gap_left_mev, j.gap_right_mev, j.resistance_kohm * 1e3)


def to_reduced_units(cfg: RunConfig) -> ReducedParams:
    u = units_of(cfg)
    j = cfg.junction
    t_left = u.temperature(j.temperature_k)
    t_right = u.temperature(j.temperature_right_k if j.temperature_right_k is not None else j.temperature_k)
    nu = u.energy_mev(j.dynes_mev)
    junction = JunctionParams(LeadParams(u.energy_mev(j.gap_left_mev), nu, t_left),
                              LeadParams(u.energy_mev(j.gap_right_mev), nu, t_right),
                              j.resistance_kohm * 1e3)
    dr = cfg.drive
    drive = DriveParams(dr.phase_bias_pi * math.pi, u.voltage(dr.amplitude_mv * 1e-3),
                        u.frequency_hz(dr.frequency_ghz * 1e9))
    c = cfg.circuit
    t_probe = c.probe_temperature_k if c.probe_temperature_k is not None else j.temperature_k
    circuit = ResonatorCircuit(u.inductance(c.inductance_nh * 1e-9), u.capacitance(c.capacitance_ff * 1e-15),
                               u.capacitance(c.coupling_capacitance_ff * 1e-15),
                               u.resistance(c.probe_impedance_ohm), u.temperature(t_probe))
    return ReducedParams(junction, drive, circuit, u)


def to_si(params: ReducedParams, numerics: Numerics | None = None, task=None) -> RunConfig:
    """Inverse of :func:`to_reduced_units`."""
    u = params.units
    j = params.junction
    tl, tr = u.to_kelvin(j.left.temperature), u.to_kelvin(j.right.temperature)
    junction = JunctionSI(u.to_joules(j.left.gap) / MEV, u.to_joules(j.right.gap) / MEV,
                          j.tunnel_resistance / 1e3, tl, None if tr == tl else tr,
                          u.to_joules(j.left.dynes_rate) / MEV)
    d = params.drive
    drive = DriveSI(u.to_volts(d.amplitude) * 1e3, u.to_hz(d.drive_freq) / 1e9, d.phase_bias / math.pi)
    c = params.circuit
    circuit = CircuitSI(u.to_farad(c.capacitance) * 1e15, u.to_henry(c.inductance) * 1e9,
                        u.to_farad(c.coupling_capacitance) * 1e15, u.to_ohm(c.probe_impedance),
                        None if c.probe_temperature == j.left.temperature else u.to_kelvin(c.probe_temperature))
    return RunConfig(junction, drive, circuit, numerics or Numerics(), task)
