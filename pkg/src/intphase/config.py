"""Experiment configuration files (TOML): schema, parsing, serialization, building."""
from __future__ import annotations

import math
import sys
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticError, model_validator

from .core import AMU, PhysicalConstants, LabEnvironment, TrapSpec, ValidationError, ViolationModel, \
    WavePacketSpec, make_species
from .geometry import BUILDERS, DslEvent, GeometrySpec, StateProgram, build_custom
from .trajectory import DEFAULT_QUAD_TOL, PiecewiseLinearCenter

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class SpeciesBlock(_Block):
    label: str = "Sr-88"
    mass: float = 87.9056
    mass_unit: Literal["u", "kg"] = "u"
    transition_frequency: float = 429e12
    frequency_unit: Literal["Hz", "rad/s"] = "Hz"

    def mass_kg(self) -> float:
        return self.mass * AMU if self.mass_unit == "u" else self.mass

    def omega(self) -> float:
        return 2 * math.pi * self.transition_frequency if self.frequency_unit == "Hz" else self.transition_frequency


class ViolationBlock(_Block):
    beta_a: float = 0.0
    beta_b: Optional[float] = None
    alpha: Optional[float] = None

    @model_validator(mode="after")
    def _one_of(self):
        if self.beta_b is not None and self.alpha is not None:
            raise ValueError("give either beta_b or alpha, not both")
        return self


class EnvironmentBlock(_Block):
    g: float = 9.81


class WavePacketBlock(_Block):
    ground_state: bool = True
    var_z0: Optional[float] = None
    var_p0: Optional[float] = None


class NumericsBlock(_Block):
    quad_tol: float = Field(DEFAULT_QUAD_TOL, gt=0)
    ode_rtol: float = Field(1e-12, gt=0)
    oracle: bool = False
    wavepacket: bool = False
    wavepacket_experimental: bool = False


class OutputBlock(_Block):
    report: Optional[str] = None
    trajectory_rate: float = Field(1000.0, gt=0)


class SensitivityBlock(_Block):
    n_at: float
    T_av: float
    t_cyc: float
    t_red: float
    dz0: Optional[float] = None


# ------------------------------------------------------------ geometry blocks

class _Geo(_Block):
    pass


class ClockStatic(_Geo):
    name: Literal["clock_static"]
    dzeta0: float
    T: float
    gamma: float = 2 * math.pi * 100.0
    delta_gamma2: float = 0.0
    zeta_lower: float = 0.0


class ClockFreeFall(_Geo):
    name: Literal["clock_free_fall"]
    dzeta0: float
    T: float
    gamma0: float = 2 * math.pi * 100.0
    zeta_lower: float = 0.0


class ClockGuided(_Geo):
    name: Literal["clock_guided"]
    v: float
    T: float
    Tp: float
    gamma: float = 2 * math.pi * 100.0
    delta_gamma2: float = 0.0
    zeta0: float = 0.0


class AiMachZehnder(_Geo):
    name: Literal["ai_mach_zehnder"]
    k: float
    T: float
    z0: float = 0.0
    v0: float = 0.0
    velocity_transfer: bool = False


class AiLevitated(_Geo):
    name: Literal["ai_levitated"]
    k: Optional[float] = None
    dz0: Optional[float] = None
    T: float
    N: int
    a: Optional[float] = None
    a_ratio: Optional[float] = None
    offset: int = 1
    z0: float = 0.0
    v0: float = 0.0


class AiGuided(_Geo):
    name: Literal["ai_guided"]
    v: float
    T: float
    Tp: float
    gamma: float = 2 * math.pi * 100.0
    delta_gamma2: float = 0.0
    zeta0: float = 0.0


class AiDoublyDifferential(_Geo):
    name: Literal["ai_doubly_differential"]
    k: float
    T: float
    t1: float
    t2: float
    realization: int = 1
    t_close: Optional[float] = None
    z0: float = 0.0
    v0: float = 0.0


class AiSymmetric(_Geo):
    name: Literal["ai_symmetric_transitions"]
    k: float
    T: float
    Tp: float
    z0: float = 0.0
    v0: float = 0.0


class EventBlock(_Block):
    time: float
    branch: Literal["upper", "lower", "both"]
    kind: Literal["kick", "relaunch", "velocity_kick", "trap_on", "trap_off", "state_flip", "clock_init"]
    magnitude: float = 0.0


class ComponentBlock(_Block):
    name: str
    initial: Literal[1, -1]
    flips: list[tuple[float, Literal[1, -1]]] = []


class CenterBlock(_Block):
    times: list[float]
    values: list[float]


class TrapBlock(_Block):
    gamma: float
    delta_gamma2: float = 0.0


class Custom(_Geo):
    name: Literal["custom"]
    label: str = "custom"
    mode: Literal["clock", "interferometer"]
    t_end: float
    events: list[EventBlock] = []
    components: Optional[list[ComponentBlock]] = None
    pairing: Optional[tuple[str, str]] = None
    window: Optional[tuple[float, float]] = None
    reference_separation: float = 0.0
    trap: Optional[TrapBlock] = None
    center_upper: Optional[CenterBlock] = None
    center_lower: Optional[CenterBlock] = None
    z0_upper: Optional[float] = 0.0
    z0_lower: Optional[float] = 0.0
    v0_upper: float = 0.0
    v0_lower: float = 0.0
    trap_initially_on: bool = False
    coalesce: bool = False
    require_closed: bool = False


GeometryBlock = Annotated[Union[ClockStatic, ClockFreeFall, ClockGuided, AiMachZehnder, AiLevitated,
                                AiGuided, AiDoublyDifferential, AiSymmetric, Custom],
                          Field(discriminator="name")]


class ExperimentConfig(_Block):
    species: SpeciesBlock = SpeciesBlock()
    violation: ViolationBlock = ViolationBlock()
    environment: EnvironmentBlock = EnvironmentBlock()
    geometry: GeometryBlock
    wavepacket: Optional[WavePacketBlock] = None
    numerics: NumericsBlock = NumericsBlock()
    output: OutputBlock = OutputBlock()
    sensitivity: Optional[SensitivityBlock] = None


# ------------------------------------------------------------ parsing

class ConfigError(ValidationError):
    """Config file could not be parsed or validated."""


def _format_pydantic(exc: PydanticError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"])
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except PydanticError as exc:
        raise ConfigError(f"invalid config: {_format_pydantic(exc)}") from None


def loads_config(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    return parse_config(data)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return loads_config(text)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return cfg.model_dump(mode="python", exclude_none=True)


def dumps_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


# ------------------------------------------------------------ building

def build_species(cfg: ExperimentConfig):
    return make_species(cfg.species.mass_kg(), cfg.species.omega(), cfg.species.label, PhysicalConstants())


def build_violation(cfg: ExperimentConfig, species) -> ViolationModel:
    v = cfg.violation
    if v.alpha is not None:
        return ViolationModel.from_alpha(v.alpha, species, v.beta_a)
    return ViolationModel(v.beta_a, v.beta_a if v.beta_b is None else v.beta_b)


def build_spec(cfg: ExperimentConfig) -> GeometrySpec:
    """Turn a validated config into a GeometrySpec."""
    sp = build_species(cfg)
    vi = build_violation(cfg, sp)
    env = LabEnvironment(cfg.environment.g)
    geo = cfg.geometry
    wp = None
    if cfg.wavepacket is not None:
        wb = cfg.wavepacket
        if wb.var_z0 is not None or wb.var_p0 is not None:
            if wb.var_z0 is None or wb.var_p0 is None:
                raise ConfigError("wavepacket: give both var_z0 and var_p0")
            wp = WavePacketSpec(wb.var_z0, wb.var_p0, hbar=sp.constants.hbar)
        else:
            gamma = getattr(geo, "gamma", None) or getattr(geo, "gamma0", None)
            if gamma is None and isinstance(geo, Custom) and geo.trap is not None:
                gamma = geo.trap.gamma
            if not gamma:
                raise ConfigError("wavepacket.ground_state: geometry has no trap frequency")
            wp = WavePacketSpec.ground_state(sp.m, gamma, sp.constants.hbar)
    common = dict(species=sp, violation=vi, environment=env, wavepacket=wp)
    if isinstance(geo, Custom):
        events = [DslEvent(e.time, e.branch, e.kind, e.magnitude) for e in geo.events]
        comps = None
        if geo.components is not None:
            comps = [(c.name, StateProgram(c.initial, tuple((t, l) for t, l in c.flips))) for c in geo.components]
        centers = {}
        for br, cb in (("upper", geo.center_upper), ("lower", geo.center_lower)):
            if cb is not None:
                centers[br] = PiecewiseLinearCenter(tuple(cb.times), tuple(cb.values))
        trap = TrapSpec(geo.trap.gamma, geo.trap.delta_gamma2) if geo.trap is not None else None
        return build_custom(geo.label, geo.mode, geo.t_end, events, comps, geo.pairing, geo.window,
                            geo.reference_separation, trap, centers, (geo.z0_upper, geo.z0_lower),
                            (geo.v0_upper, geo.v0_lower), geo.trap_initially_on, geo.coalesce,
                            geo.require_closed, **common)
    params = geo.model_dump(exclude={"name"})
    return BUILDERS[geo.name](**params, **common)


# ------------------------------------------------------------ sweeps

def _blocks(cfg: ExperimentConfig) -> list[tuple[str, BaseModel]]:
    out = [("geometry", cfg.geometry), ("violation", cfg.violation), ("environment", cfg.environment),
           ("species", cfg.species), ("numerics", cfg.numerics)]
    if cfg.sensitivity is not None:
        out.append(("sensitivity", cfg.sensitivity))
    return out


def resolve_axis(cfg: ExperimentConfig, axis: str) -> str:
    """Full dotted name of a sweep axis ('g' -> 'environment.g')."""
    blocks = dict(_blocks(cfg))
    if "." in axis:
        block, key = axis.split(".", 1)
        model = blocks.get(block)
        if model is None or key not in type(model).model_fields or key == "name":
            raise ConfigError(f"sweep axis {axis!r} does not exist in the config schema")
        return axis
    hits = [f"{name}.{axis}" for name, model in blocks.items()
            if axis in type(model).model_fields and axis != "name"]
    if not hits:
        raise ConfigError(f"sweep axis {axis!r} does not exist in the config schema")
    return hits[0]


def with_value(cfg: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    """Copy of cfg with one parameter replaced (validated)."""
    block, key = resolve_axis(cfg, axis).split(".", 1)
    data = config_to_dict(cfg)
    data.setdefault(block, {})[key] = value
    if block == "violation" and key == "alpha":
        data["violation"].pop("beta_b", None)
    return parse_config(data)
