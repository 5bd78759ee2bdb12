"""Scenario and algorithm configuration.

A config file is YAML, nested or with dotted keys (``dims.n_bs: 60``).
Missing keys take the defaults below, unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .channel import PathLossSpec, PilotSpec, pathloss_gain
from .secrecy import ChannelStats, LinkSpec, NoiseSpec, RateBreakdown, prelog_factor
from .sensing import SensingModel


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Dims:
    n_bs: int = 80
    n_uav: int = 12
    n_eave: int = 10
    n_user: int = 4


@dataclass(frozen=True)
class Geometry:
    dis_bs_uav: float = 100.0
    dis_uav_user: float = 100.0
    dis_bs_eave: float = 100.0
    dis_uav_eave: float = 100.0
    dis_ref: float = 100.0
    pathloss_exp: float = 2.4


@dataclass(frozen=True)
class Power:
    p_sum: float = 2.0
    p_uav: float = 1.0
    p_user: float = 1.0


@dataclass(frozen=True)
class Pilot:
    t_uav: float = 15.0
    t_user: float = 4.0
    t_c_uav: float = 196.0
    t_c_bs: float = 196.0
    t_bs: float = 4.0


@dataclass(frozen=True)
class Channel:
    # levels are standard deviations in units of noise_unit; sigma_* override them
    noise_level: float = 2.0
    an_level: float = 4.75
    noise_unit: float = 0.1
    sigma_uav: float | None = None
    sigma_user: float | None = None
    sigma_eave: float | None = None
    sigma_z: float | None = None


@dataclass(frozen=True)
class Sensing:
    theta0_deg: float = 0.0
    grid_points: int = 181
    spacing: float = 0.5
    mode: str = "rank_one"
    lambda_mode: str = "fixed"


@dataclass(frozen=True)
class Weights:
    secrecy: float = 1.0
    aoi: float = 0.01
    energy: float = 10.0


@dataclass(frozen=True)
class Constraints:
    gamma_th: float = 0.1
    iota: float = 1e-6


@dataclass(frozen=True)
class Bounds:
    mu_min: float = 0.05
    mu_max: float = 5.0
    margin: float = 1e-3


@dataclass(frozen=True)
class MonteCarlo:
    samples: int = 1000
    average_users: bool = False


@dataclass(frozen=True)
class AoISettings:
    formula: str = "exact"
    penalty: float = 1e6


@dataclass(frozen=True)
class MOEASettings:
    pop_size: int = 100
    budget: int = 20000
    de_f_min: float = 0.4
    de_f_max: float = 0.9
    de_cr: float = 0.9
    sbx_eta: float = 15.0
    sbx_prob: float = 0.9
    pm_eta: float = 20.0
    restart_fraction: float = 0.2
    operators: tuple = (True, True, True, True)
    imode_n_min: int = 8
    imode_pbest: float = 0.1
    archive_size: int = 10


@dataclass(frozen=True)
class DQNSettings:
    hidden: tuple = (64, 64)
    lr: float = 1e-3
    batch: int = 32
    buffer: int = 512
    warmup: int = 32
    sync_every: int = 50
    discount: float = 0.9
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_frac: float = 0.5
    train_steps: int = 16
    reward_weights: tuple = (1.0, 1.0, 1.0)
    div_clip: float = 1e3


@dataclass(frozen=True)
class SystemConfig:
    dims: Dims = field(default_factory=Dims)
    geometry: Geometry = field(default_factory=Geometry)
    power: Power = field(default_factory=Power)
    pilot: Pilot = field(default_factory=Pilot)
    channel: Channel = field(default_factory=Channel)
    sensing: Sensing = field(default_factory=Sensing)
    weights: Weights = field(default_factory=Weights)
    constraints: Constraints = field(default_factory=Constraints)
    bounds: Bounds = field(default_factory=Bounds)
    mc: MonteCarlo = field(default_factory=MonteCarlo)
    aoi: AoISettings = field(default_factory=AoISettings)
    moea: MOEASettings = field(default_factory=MOEASettings)
    dqn: DQNSettings = field(default_factory=DQNSettings)

    def __post_init__(self):
        validate(self)

    # derived physical quantities

    def gain(self, dis: float) -> float:
        g = self.geometry
        return pathloss_gain(PathLossSpec(dis, g.dis_ref, g.pathloss_exp))

    def link_spec(self) -> LinkSpec:
        d, g, p, t = self.dims, self.geometry, self.power, self.pilot
        return LinkSpec(
            n_bs=d.n_bs, n_uav=d.n_uav, n_eave=d.n_eave, n_user=d.n_user,
            gain_bs_uav=self.gain(g.dis_bs_uav), gain_uav_user=self.gain(g.dis_uav_user),
            gain_bs_eave=self.gain(g.dis_bs_eave), gain_uav_eave=self.gain(g.dis_uav_eave),
            pilot_uav=PilotSpec(t.t_uav, p.p_uav), pilot_user=PilotSpec(t.t_user, p.p_user),
        )

    def noise_spec(self) -> NoiseSpec:
        c = self.channel
        base = c.noise_level * c.noise_unit

        def var(override, default):
            return (default if override is None else override) ** 2

        return NoiseSpec(uav=var(c.sigma_uav, base), user=var(c.sigma_user, base),
                         eave=var(c.sigma_eave, base), z=var(c.sigma_z, c.an_level * c.noise_unit))

    def prelog(self) -> float:
        t = self.pilot
        return prelog_factor(t.t_c_uav, t.t_c_bs, t.t_uav, t.t_bs)

    def sensing_model(self) -> SensingModel:
        s = self.sensing
        return SensingModel(n_bs=self.dims.n_bs, p_sum=self.power.p_sum, theta0=math.radians(s.theta0_deg),
                            points=s.grid_points, spacing=s.spacing, mode=s.mode, lambda_mode=s.lambda_mode)

    def rates_from_stats(self, stats: ChannelStats, p_com: float, p_an: float) -> RateBreakdown:
        return stats.rates(p_com, p_an, self.noise_spec(), self.power.p_uav, self.dims.n_uav, self.prelog(),
                           average_users=self.mc.average_users)

    # bookkeeping

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def flat(self) -> dict:
        return _flatten(self.to_dict())

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def replace(self, **dotted) -> "SystemConfig":
        """``cfg.replace(**{"dims.n_bs": 60})``"""
        return from_flat({**self.flat(), **dotted}, strict_keys=True)


_SECTION_TYPES = {f.name: f.default_factory for f in dataclasses.fields(SystemConfig)}

_POSITIVE = [
    "dims.n_bs", "dims.n_uav", "dims.n_eave", "dims.n_user",
    "geometry.dis_bs_uav", "geometry.dis_uav_user", "geometry.dis_bs_eave", "geometry.dis_uav_eave",
    "geometry.dis_ref", "power.p_sum", "power.p_uav", "power.p_user",
    "pilot.t_uav", "pilot.t_user", "pilot.t_c_uav", "pilot.t_c_bs",
    "channel.noise_level", "channel.an_level", "channel.noise_unit",
    "sensing.grid_points", "sensing.spacing", "bounds.mu_min", "mc.samples",
    "moea.pop_size", "moea.archive_size", "moea.sbx_eta", "moea.pm_eta", "moea.imode_n_min",
    "dqn.lr", "dqn.batch", "dqn.buffer", "dqn.sync_every", "dqn.train_steps", "dqn.div_clip",
]
_NON_NEGATIVE = [
    "geometry.pathloss_exp", "pilot.t_bs", "weights.secrecy", "weights.aoi", "weights.energy",
    "constraints.gamma_th", "constraints.iota", "bounds.margin", "moea.budget", "moea.de_f_min",
    "dqn.warmup", "aoi.penalty",
]
_UNIT = ["moea.de_cr", "moea.sbx_prob", "moea.restart_fraction", "moea.imode_pbest",
         "dqn.eps_start", "dqn.eps_end", "dqn.eps_decay_frac"]


def validate(cfg: SystemConfig):
    flat = cfg.flat()
    for k in _POSITIVE:
        if not flat[k] > 0:
            raise ConfigError(f"{k} must be > 0, got {flat[k]!r}")
    for k in _NON_NEGATIVE:
        if not flat[k] >= 0:
            raise ConfigError(f"{k} must be >= 0, got {flat[k]!r}")
    for k in _UNIT:
        if not 0 <= flat[k] <= 1:
            raise ConfigError(f"{k} must lie in [0, 1], got {flat[k]!r}")
    for k in ("channel.sigma_uav", "channel.sigma_user", "channel.sigma_eave", "channel.sigma_z"):
        if flat[k] is not None and not flat[k] > 0:
            raise ConfigError(f"{k} must be > 0 or null, got {flat[k]!r}")
    d = cfg.dims
    if d.n_user > min(d.n_uav, d.n_bs):
        raise ConfigError(f"dims.n_user={d.n_user} exceeds min(n_uav, n_bs); ZF impossible")
    if d.n_bs <= d.n_user:
        raise ConfigError("dims.n_bs must exceed dims.n_user for AN shaping")
    if cfg.bounds.mu_max <= cfg.bounds.mu_min:
        raise ConfigError("bounds.mu_max must exceed bounds.mu_min")
    if not 0 <= cfg.bounds.margin < 0.5:
        raise ConfigError("bounds.margin must lie in [0, 0.5)")
    if cfg.pilot.t_c_uav <= cfg.pilot.t_uav or cfg.pilot.t_c_bs <= cfg.pilot.t_bs:
        raise ConfigError("pilot.t_c_* must exceed the pilot durations")
    if cfg.sensing.mode not in ("rank_one", "isotropic"):
        raise ConfigError(f"sensing.mode must be rank_one or isotropic, got {cfg.sensing.mode!r}")
    if cfg.sensing.lambda_mode not in ("fixed", "least_squares"):
        raise ConfigError(f"sensing.lambda_mode must be fixed or least_squares, got {cfg.sensing.lambda_mode!r}")
    if cfg.aoi.formula not in ("exact", "theorem"):
        raise ConfigError(f"aoi.formula must be exact or theorem, got {cfg.aoi.formula!r}")
    if cfg.moea.pop_size < 4:
        raise ConfigError("moea.pop_size must be >= 4")
    if len(cfg.moea.operators) != 4 or not any(cfg.moea.operators):
        raise ConfigError("moea.operators needs 4 flags with at least one enabled")
    if cfg.moea.de_f_max < cfg.moea.de_f_min:
        raise ConfigError("moea.de_f_max must be >= moea.de_f_min")
    if cfg.moea.imode_n_min > cfg.moea.pop_size:
        raise ConfigError("moea.imode_n_min must not exceed moea.pop_size")
    if len(cfg.dqn.reward_weights) != 3:
        raise ConfigError("dqn.reward_weights needs three entries")
    if not 0 <= cfg.dqn.discount < 1:
        raise ConfigError("dqn.discount must lie in [0, 1)")
    if not cfg.dqn.hidden or any(int(h) < 1 for h in cfg.dqn.hidden):
        raise ConfigError("dqn.hidden must list positive layer widths")


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _coerce(key: str, value: Any, default: Any):
    kind = type(default)
    if value is None:
        if default is None:
            return None
        raise ConfigError(f"{key} may not be null")
    if default is None:
        kind = float
    try:
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if kind is str:
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind is tuple:
            if not isinstance(value, (list, tuple)):
                raise TypeError
            inner = type(default[0]) if default else float
            return tuple(_coerce(f"{key}[{i}]", x, inner()) for i, x in enumerate(value))
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot use {value!r} as {kind.__name__}") from None
    return value


def from_flat(flat: dict, strict_keys: bool = True) -> SystemConfig:
    defaults = SystemConfig().flat() if strict_keys else {}
    sections: dict[str, dict] = {name: {} for name in _SECTION_TYPES}
    for key, value in flat.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r}")
        sec, name = key.split(".", 1)
        sections[sec][name] = _coerce(key, value, defaults[key])
    built = {sec: _SECTION_TYPES[sec](**vals) for sec, vals in sections.items()}
    return SystemConfig(**built)


def parse_config(text: str) -> SystemConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config file must be a mapping")
    return from_flat(_flatten(data))


def load_config(path) -> SystemConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_config(text)


def default_config_text() -> str:
    return resources.files("iscc").joinpath("default.yaml").read_text()


def default_config() -> SystemConfig:
    return parse_config(default_config_text())
