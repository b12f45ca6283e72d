"""Scenario configuration: JSON document with defaults for every field.

Angles are given in degrees and radio levels in dB/dBm; conversion to
the SI/linear units used by the library happens in the accessors.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Any

from .channel import CrowdParams, DeploymentParams, RadioParams, db_to_linear, dbm_to_watt
from .dynamics import BehaviorFactors
from .equilibrium import EconParams, Game
from .quality import QualityParams, quality


class ConfigError(ValueError):
    """Invalid scenario document; the message names the offending key."""


@dataclass(frozen=True)
class CrowdSection:
    mu: float = 2.0
    mu0: float = 0.2
    h_b: float = 1.7
    r_b: float = 0.2
    h_d: float = 1.2


@dataclass(frozen=True)
class AreaSection:
    R: float = 200.0
    phi_deg: float = 10.0
    beta_max_deg: float = 60.0
    alpha_view_deg: float = 270.0


@dataclass(frozen=True)
class RadioSection:
    p_tx: float = 0.2
    eff_bw_factor: float = 0.5
    n0_dbm: float = -80.0
    g_nlos_db: float = -30.0
    snr_max_db: float = 20.0


@dataclass(frozen=True)
class FleetSection:
    altitude: float = 15.0
    bandwidth: float = 2e9
    frequency: float = 28e9
    n_aap: int = 18


def _usp_fleet():
    return FleetSection(altitude=30.0, bandwidth=6e9, frequency=60e9, n_aap=5)


@dataclass(frozen=True)
class FleetsSection:
    lsp1: FleetSection = field(default_factory=FleetSection)
    lsp2: FleetSection = field(default_factory=FleetSection)
    usp: FleetSection = field(default_factory=_usp_fleet)


@dataclass(frozen=True)
class EconomicsSection:
    theta_max: float = 234.03
    T_max: float = 100.0
    a: float = 12.36  # tariff scale, absorbed into taste; kept as metadata
    b: float = 0.5619
    c: float = 0.0098
    nu: float = 0.0647


@dataclass(frozen=True)
class BehaviorSection:
    xi: float = 1.0
    gamma: float = 0.05
    alpha_c: float = 0.05
    delta: float = 0.1
    c_u: float = 0.1
    c_price: float = 0.1


@dataclass(frozen=True)
class RunSection:
    game: str = "bertrand"
    horizon: float = 120.0
    dt: float = 0.05
    seeds: int = 10
    seed: int = 0
    coop: bool = False
    p0_rule: str = "half_p2"
    p0_initial: float | None = None
    n_agents: int = 8000
    abm_dt: float = 1.0
    eps_samples: int = 200_000
    lsp2_offset: Any = "interleave"
    max_deviation: float = 0.05


@dataclass(frozen=True)
class ScenarioConfig:
    crowd: CrowdSection = field(default_factory=CrowdSection)
    area: AreaSection = field(default_factory=AreaSection)
    radio: RadioSection = field(default_factory=RadioSection)
    fleets: FleetsSection = field(default_factory=FleetsSection)
    economics: EconomicsSection = field(default_factory=EconomicsSection)
    behavior: BehaviorSection = field(default_factory=BehaviorSection)
    run: RunSection = field(default_factory=RunSection)

    def __post_init__(self):
        validate(self)

    # --- typed views used by the library -----------------------------------

    def crowd_params(self) -> CrowdParams:
        return CrowdParams(**dataclasses.asdict(self.crowd))

    def deployment(self, fleet: str) -> DeploymentParams:
        a = self.area
        return DeploymentParams(R=a.R, h=getattr(self.fleets, fleet).altitude,
                                phi=math.radians(a.phi_deg), beta_max=math.radians(a.beta_max_deg),
                                alpha_view=math.radians(a.alpha_view_deg))

    def radio_params(self, fleet: str) -> RadioParams:
        r, f = self.radio, getattr(self.fleets, fleet)
        return RadioParams(p_tx=r.p_tx, f=f.frequency, B=f.bandwidth, eff_bw_factor=r.eff_bw_factor,
                           N0=float(dbm_to_watt(r.n0_dbm)), G_nlos=float(db_to_linear(r.g_nlos_db)),
                           snr_max=float(db_to_linear(r.snr_max_db)))

    def quality_params(self) -> QualityParams:
        e = self.economics
        return QualityParams(b=e.b, c=e.c, theta_max=e.theta_max)

    def econ_params(self) -> EconParams:
        e = self.economics
        return EconParams(s_max=quality(e.T_max, self.quality_params()), theta_max=e.theta_max, nu=e.nu)

    def behavior_factors(self) -> BehaviorFactors:
        return BehaviorFactors(**dataclasses.asdict(self.behavior))

    @property
    def game(self) -> Game:
        return Game(self.run.game)

    def replace(self, **sections) -> "ScenarioConfig":
        """Copy with whole sections or ``section__key`` overrides, e.g. ``behavior__gamma=0.5``."""
        doc = self.to_dict()
        for key, value in sections.items():
            if "__" in key:
                sec, sub = key.split("__", 1)
                if sec == "fleets" and "__" in sub:
                    name, sub = sub.split("__", 1)
                    doc[sec][name][sub] = value
                else:
                    doc[sec][sub] = value
            else:
                doc[key] = value
        return from_dict(doc)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _build(cls, doc, path: str):
    if dataclasses.is_dataclass(doc):
        return doc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path or 'document'}: expected an object, got {type(doc).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(doc) - set(known))
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown key {where}{unknown[0]}")
    kwargs = {}
    for name, value in doc.items():
        f = known[name]
        key = f"{path}.{name}" if path else name
        sub = _section_type(cls, name)
        if sub is not None:
            kwargs[name] = _build(sub, value, key)
        else:
            kwargs[name] = _coerce(value, f, key)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'document'}: {exc}") from exc


_SECTIONS = {
    ScenarioConfig: {"crowd": CrowdSection, "area": AreaSection, "radio": RadioSection,
                     "fleets": FleetsSection, "economics": EconomicsSection,
                     "behavior": BehaviorSection, "run": RunSection},
    FleetsSection: {"lsp1": FleetSection, "lsp2": FleetSection, "usp": FleetSection},
}


def _section_type(cls, name):
    return _SECTIONS.get(cls, {}).get(name)


def _coerce(value, f: dataclasses.Field, key: str):
    default = f.default if f.default is not dataclasses.MISSING else None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float) or (default is None and f.name == "p0_initial"):
        if value is None and default is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(f"{key}: must be finite")
        return float(value)
    return value


def _check(cond: bool, key: str, msg: str):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def validate(cfg: ScenarioConfig):
    """Re-check every module invariant; raise ConfigError naming the key."""
    c = cfg.crowd
    _check(c.mu > 0, "crowd.mu", "must be positive")
    _check(0 < c.mu0 < c.mu, "crowd.mu0", f"need 0 < mu0 < mu (mu0={c.mu0}, mu={c.mu})")
    _check(c.r_b > 0, "crowd.r_b", "must be positive")
    _check(0 <= c.h_d < c.h_b, "crowd.h_d", "need 0 <= h_d < h_b")
    a = cfg.area
    _check(a.R > 0, "area.R", "must be positive")
    _check(0 < a.phi_deg < 90, "area.phi_deg", "must lie in (0, 90)")
    _check(0 < a.beta_max_deg < 90, "area.beta_max_deg", "must lie in (0, 90)")
    r = cfg.radio
    _check(r.p_tx > 0, "radio.p_tx", "must be positive")
    _check(0 < r.eff_bw_factor <= 1, "radio.eff_bw_factor", "must lie in (0, 1]")
    _check(r.g_nlos_db <= 0, "radio.g_nlos_db", "reflection cannot amplify (must be <= 0 dB)")
    for name in ("lsp1", "lsp2", "usp"):
        f = getattr(cfg.fleets, name)
        key = f"fleets.{name}"
        _check(f.altitude > c.h_b, f"{key}.altitude", f"must exceed body height {c.h_b}")
        _check(f.bandwidth > 0, f"{key}.bandwidth", "must be positive")
        _check(f.frequency > 0, f"{key}.frequency", "must be positive")
        _check(f.n_aap >= 1, f"{key}.n_aap", "must be >= 1")
    e = cfg.economics
    _check(e.theta_max > 0, "economics.theta_max", "must be positive")
    _check(e.theta_max > e.nu, "economics.theta_max", f"need theta_max > nu (nu={e.nu})")
    _check(e.nu >= 0, "economics.nu", "must be non-negative")
    _check(e.T_max > 0, "economics.T_max", "must be positive")
    _check(e.b >= 0, "economics.b", "must be non-negative")
    _check(e.c >= 0, "economics.c", "must be non-negative")
    for name, v in dataclasses.asdict(cfg.behavior).items():
        _check(v >= 0, f"behavior.{name}", "must be non-negative")
    for name in ("gamma", "alpha_c", "delta"):
        _check(getattr(cfg.behavior, name) <= 1, f"behavior.{name}", "must lie in [0, 1]")
    u = cfg.run
    _check(u.game in ("bertrand", "cournot"), "run.game", "must be 'bertrand' or 'cournot'")
    _check(u.horizon > 0, "run.horizon", "must be positive")
    _check(u.dt > 0, "run.dt", "must be positive")
    _check(u.abm_dt > 0, "run.abm_dt", "must be positive")
    _check(u.seeds >= 1, "run.seeds", "must be >= 1")
    _check(u.n_agents >= 1, "run.n_agents", "must be >= 1")
    _check(u.eps_samples >= 1, "run.eps_samples", "must be >= 1")
    _check(u.p0_rule in ("half_p2", "p2"), "run.p0_rule", "must be 'half_p2' or 'p2'")
    _check(u.p0_initial is None or u.p0_initial > 0, "run.p0_initial", "must be positive")
    _check(u.max_deviation > 0, "run.max_deviation", "must be positive")
    off = u.lsp2_offset
    ok = off in ("interleave", "none") or (
        isinstance(off, (list, tuple)) and len(off) == 2
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in off))
    _check(ok, "run.lsp2_offset", "must be 'interleave', 'none' or [dx, dy]")


def from_dict(doc: dict) -> ScenarioConfig:
    return _build(ScenarioConfig, doc, "")


def load_config(path) -> ScenarioConfig:
    """Read and validate a JSON scenario; omitted fields take their defaults."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return from_dict(doc)
