"""Scenario configuration: schema, validation, canonical hashing.

A scenario is one hierarchical JSON document. ``parse_scenario`` returns a
validated :class:`ScenarioConfig` or raises :class:`ValidationError` listing
every violation with its dotted field path.
"""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import pydantic
from pydantic import BaseModel, ConfigDict, Field

BUNDLED = ("iot_case_study",)


class ValidationError(ValueError):
    """Scenario validation failure carrying ``(path, message)`` pairs."""

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = violations
        super().__init__("; ".join(f"{p}: {m}" for p, m in violations))

    @property
    def paths(self) -> list[str]:
        return [p for p, _ in self.violations]


class ConfigError(ValueError):
    """Dangling reference inside a topology description."""


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Requirement(_Model):
    max_latency: float = Field(gt=0)
    security_level: Literal["Lightweight", "Robust"]


class Layout(_Model):
    kind: Literal["grid"] = "grid"
    origin: tuple[float, float] = (0.0, 0.0)
    extent: tuple[float, float] = (10.0, 5.0)
    note: str = "stand-in layout; UE placement is not given for the case study"


class BaseStationSpec(_Model):
    id: int
    domain: int
    position: tuple[float, float]


class CapabilityFlags(_Model):
    closed_loop: bool = True
    customized_security: bool = True
    interdomain_collab: bool = True


class DomainSpec(_Model):
    id: int
    name: str
    kind: Literal["RAN", "Edge", "Core"] = "RAN"
    nf_capacity: int = Field(default=32, gt=0)
    capability_flags: CapabilityFlags = CapabilityFlags()


class ChannelSpec(_Model):
    base_range: tuple[float, float] = (0.2, 1.0)
    jitter_sd: float = Field(default=0.05, ge=0)
    rf_range: tuple[float, float] = (0.5, 1.0)


class TopologySpec(_Model):
    ue_counts: dict[Literal["Sensor", "Industrial"], int] = {"Sensor": 40, "Industrial": 10}
    requirements: dict[Literal["Sensor", "Industrial"], Requirement] = {
        "Sensor": Requirement(max_latency=10.0, security_level="Lightweight"),
        "Industrial": Requirement(max_latency=50.0, security_level="Robust"),
    }
    layout: Layout = Layout()
    base_stations: list[BaseStationSpec]
    domains: list[DomainSpec]
    channel: ChannelSpec = ChannelSpec()


class NormalSpec(_Model):
    mean: float = Field(gt=0)
    sd: float = Field(default=0.0, ge=0)


class AkaSpec(_Model):
    ran_rtt: NormalSpec = NormalSpec(mean=4.0, sd=1.0)
    core_rtt: NormalSpec = NormalSpec(mean=12.0, sd=2.0)
    proc: NormalSpec = NormalSpec(mean=4.0, sd=1.0)


class PlsSpec(_Model):
    latency: NormalSpec = NormalSpec(mean=8.6, sd=0.8)
    attempt: NormalSpec = NormalSpec(mean=12.0, sd=1.5)
    gate_sharpness: float = Field(default=10.0, gt=0)
    gate_threshold: float = Field(default=0.5, ge=0, le=1)


class ServicesSpec(_Model):
    aka: AkaSpec = AkaSpec()
    pls: PlsSpec = PlsSpec()
    orchestration_overhead: NormalSpec = NormalSpec(mean=2.98, sd=0.5)
    nf_timeout_ms: float = Field(default=500.0, gt=0)
    packet_service_ms: float = Field(default=1.0, ge=0)
    # passed data packets waiting for an NF slot beyond this are tail-dropped
    packet_queue_limit: int = Field(default=65536, ge=0)
    token_freshness_ms: float = Field(default=5000.0, gt=0)


class TrustSpec(_Model):
    prior_alpha: float = Field(default=1.0, gt=0)
    prior_beta: float = Field(default=1.0, gt=0)
    w_mal: float = Field(default=2.0, gt=0)
    t_th: float = Field(default=0.4, gt=0, lt=1)
    t_th_robust: float = Field(default=0.5, gt=0, lt=1)
    decay_per_ms: float = Field(default=0.001, ge=0)
    rate_cap_pps: float = Field(default=50.0, gt=0)
    batch_ms: float = Field(default=100.0, gt=0)
    benign_pps: float = Field(default=5.0, ge=0)
    central_sync_ms: float = Field(default=2000.0, gt=0)


class AgentSpec(_Model):
    lr: float = Field(default=0.1, gt=0, le=1)
    discount: float = Field(default=0.9, ge=0, lt=1)
    epsilon_start: float = Field(default=0.2, ge=0, le=1)
    epsilon_end: float = Field(default=0.01, ge=0, le=1)
    slot_offsets: list[float] = [0.0, 5.0, 10.0]
    latency_bounds: list[float] = [10.0, 50.0]
    channel_bounds: list[float] = [0.25, 0.5, 0.75]
    load_bounds: list[float] = [0.25, 0.5, 0.75]
    delay_bounds: list[float] = [25.0, 100.0]
    delay_ewma: float = Field(default=0.05, gt=0, le=1)
    # "request": every access request is a one-step episode ending at its
    # feedback; "continuing": bootstrap from the UE's state at feedback time
    episode: Literal["request", "continuing"] = "request"
    # accepted for completeness; no consumer in the case study
    secret_key_rate: Optional[float] = None


class SirSpec(_Model):
    enabled: bool = False
    p_inf: float = Field(default=0.05, ge=0, le=1)
    p_rec: float = Field(default=0.01, ge=0, le=1)
    tick_ms: float = Field(default=100.0, gt=0)
    initial_infected: list[int] = [0]
    contact: Literal["shared_bs"] = "shared_bs"


class AttackSpec(_Model):
    kind: Literal["Ddos", "Poisoning", "Adversarial"]
    intensity: float
    start: float = Field(ge=0)
    end: float
    enabled: bool = False
    target: Optional[int] = None
    scope: Literal["infected", "all"] = "infected"


class ThreatSpec(_Model):
    sir: SirSpec = SirSpec()
    attacks: list[AttackSpec] = []


class RunSpec(_Model):
    duration_ms: float = Field(default=10000.0, gt=0)
    seed: int = Field(default=1, ge=0)
    mode: Literal["es3a", "centralized", "dtm"] = "es3a"
    # access requests per UE per iteration, multiplied by ``scale``
    requests_per_ue: float = Field(default=1.0, ge=0)
    iteration_ms: float = Field(default=1000.0, gt=0)
    # "rounds": each UE issues its requests at uniform times within the first
    # spread_ms of every iteration; "poisson": same mean rate, memoryless
    arrival: Literal["rounds", "poisson"] = "rounds"
    spread_ms: float = Field(default=50.0, gt=0)
    scale: float = Field(default=1.0, gt=0)
    sample_ms: float = Field(default=100.0, gt=0)


class ScenarioConfig(_Model):
    name: str = "scenario"
    topology: TopologySpec
    services: ServicesSpec = ServicesSpec()
    trust: TrustSpec = TrustSpec()
    agent: AgentSpec = AgentSpec()
    threat: ThreatSpec = ThreatSpec()
    run: RunSpec = RunSpec()

    def canonical(self) -> dict:
        return self.model_dump(mode="json")

    def with_updates(self, **sections) -> "ScenarioConfig":
        """Return a validated copy with nested fields replaced.

        ``cfg.with_updates(run={"scale": 4})`` merges into the ``run``
        section; unknown keys raise.
        """
        data = self.canonical()
        for section, values in sections.items():
            data[section] = _merge(data[section], values)
        return validate_scenario(data)


def _merge(base, upd):
    if isinstance(base, dict) and isinstance(upd, dict):
        out = dict(base)
        for k, v in upd.items():
            out[k] = _merge(base.get(k), v) if k in base else v
        return out
    return upd


def _loc(loc) -> str:
    return ".".join(str(p) for p in loc)


def _cross_checks(data: dict) -> list[tuple[str, str]]:
    """Reference and range checks that span fields; tolerant of bad structure."""
    errs: list[tuple[str, str]] = []
    try:
        topo = data["topology"]
        dom_ids = [d["id"] for d in topo["domains"]]
        if len(set(dom_ids)) != len(dom_ids):
            errs.append(("topology.domains", "duplicate domain id"))
        bs_ids = [b["id"] for b in topo["base_stations"]]
        if len(set(bs_ids)) != len(bs_ids):
            errs.append(("topology.base_stations", "duplicate base-station id"))
        for i, b in enumerate(topo["base_stations"]):
            if b["domain"] not in dom_ids:
                errs.append((f"topology.base_stations.{i}.domain", f"unknown domain {b['domain']}"))
        counts = topo.get("ue_counts", {"Sensor": 40, "Industrial": 10})
        for cls, n in counts.items():
            if n < 0:
                errs.append((f"topology.ue_counts.{cls}", "must be >= 0"))
        n_ue = sum(counts.values())
        for key in ("base_range", "rf_range"):
            lo, hi = topo.get("channel", {}).get(key, (0.0, 1.0))
            if not 0.0 <= lo <= hi <= 1.0:
                errs.append((f"topology.channel.{key}", "must satisfy 0 <= lo <= hi <= 1"))
    except (KeyError, TypeError):
        return errs
    threat = data.get("threat", {})
    sir = threat.get("sir", {})
    for i, u in enumerate(sir.get("initial_infected", [])):
        if not (isinstance(u, int) and 0 <= u < n_ue):
            errs.append((f"threat.sir.initial_infected.{i}", f"UE {u} not in population"))
    for i, a in enumerate(threat.get("attacks", [])):
        try:
            if a["end"] <= a["start"]:
                errs.append((f"threat.attacks.{i}.end", "must be > start"))
            k, x = a["kind"], a["intensity"]
            if k == "Ddos" and x < 0:
                errs.append((f"threat.attacks.{i}.intensity", "packet rate must be >= 0"))
            if k == "Poisoning" and not 0 <= x <= 1:
                errs.append((f"threat.attacks.{i}.intensity", "flip fraction must be in [0, 1]"))
            if k == "Adversarial" and x not in (0, 1, 2):
                errs.append((f"threat.attacks.{i}.intensity", "bucket shift must be 0, 1 or 2"))
            if a.get("target") is not None and a["target"] not in dom_ids:
                errs.append((f"threat.attacks.{i}.target", f"unknown domain {a['target']}"))
        except (KeyError, TypeError):
            continue
    run = data.get("run", {})
    if run.get("spread_ms", 0) > run.get("iteration_ms", float("inf")):
        errs.append(("run.spread_ms", "must not exceed run.iteration_ms"))
    agent = data.get("agent", {})
    for key in ("latency_bounds", "channel_bounds", "load_bounds", "delay_bounds"):
        b = agent.get(key)
        if b is not None and list(b) != sorted(b):
            errs.append((f"agent.{key}", "bucket boundaries must be increasing"))
    offs = agent.get("slot_offsets")
    if offs is not None and (not offs or min(offs) < 0):
        errs.append(("agent.slot_offsets", "need at least one offset, all >= 0"))
    return errs


def validate_scenario(data: dict) -> ScenarioConfig:
    violations: list[tuple[str, str]] = []
    cfg = None
    try:
        cfg = ScenarioConfig.model_validate(data)
    except pydantic.ValidationError as exc:
        violations.extend((_loc(e["loc"]), e["msg"]) for e in exc.errors())
    violations.extend(_cross_checks(cfg.canonical() if cfg is not None else data))
    if violations:
        raise ValidationError(violations)
    return cfg


def load_json(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("es3asim") / "scenarios" / f"{name}.json"))


def parse_scenario(path: str | Path) -> ScenarioConfig:
    """Load and validate a scenario file; bundled names are accepted too."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        p = bundled_path(str(path))
    if not p.exists():
        raise OSError(f"scenario file not found: {path}")
    try:
        data = load_json(p)
    except json.JSONDecodeError as exc:
        raise ValidationError([("<document>", f"invalid JSON: {exc}")]) from exc
    return validate_scenario(data)


def default_scenario() -> ScenarioConfig:
    return parse_scenario(bundled_path("iot_case_study"))


def scenario_hash(cfg: ScenarioConfig | dict) -> str:
    data = cfg.canonical() if isinstance(cfg, ScenarioConfig) else validate_scenario(cfg).canonical()
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
