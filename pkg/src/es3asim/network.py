"""Static topology and the per-access channel-quality model."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

from .config import ConfigError
from .kernel import RngStream, derive_stream

if TYPE_CHECKING:
    from .config import ScenarioConfig
    from .trust import TrustRecord


class EmptyTopologyError(ValueError):
    pass


class UeClass(str, Enum):
    SENSOR = "Sensor"
    INDUSTRIAL = "Industrial"


class SecurityLevel(str, Enum):
    LIGHTWEIGHT = "Lightweight"
    ROBUST = "Robust"


class Infection(str, Enum):
    SUSCEPTIBLE = "S"
    INFECTED = "I"
    RECOVERED = "R"


@dataclass(frozen=True)
class SecurityRequirement:
    max_latency: float
    security_level: SecurityLevel

    def __post_init__(self):
        if self.max_latency <= 0:
            raise ValueError("max_latency must be positive")


@dataclass
class UeNode:
    id: int
    ue_class: UeClass
    req: SecurityRequirement
    position: tuple[float, float]
    rf_fingerprint_quality: float
    # long-run channel quality per base station, fixed at setup
    base_quality: dict[int, float] = field(default_factory=dict)
    # most recent sampled quality per base station
    channel_quality: dict[int, float] = field(default_factory=dict)
    infection: Infection = Infection.SUSCEPTIBLE
    attached_bs: int | None = None
    home_domain: int | None = None
    serving_domain: int | None = None


@dataclass
class BaseStation:
    id: int
    domain_id: int
    position: tuple[float, float]
    load: int = 0


@dataclass
class SecurityDomain:
    id: int
    name: str
    kind: str = "RAN"
    bs_members: set[int] = field(default_factory=set)
    nf_capacity: int = 32
    nf_in_use: int = 0
    trust_store: dict[int, "TrustRecord"] = field(default_factory=dict)
    closed_loop: bool = True
    customized_security: bool = True
    interdomain_collab: bool = True
    key: bytes = b""

    def acquire(self) -> None:
        if self.nf_in_use >= self.nf_capacity:
            raise RuntimeError(f"domain {self.id} has no free NF slot")
        self.nf_in_use += 1

    def release(self) -> None:
        if self.nf_in_use <= 0:
            raise RuntimeError(f"domain {self.id} released an idle NF slot")
        self.nf_in_use -= 1

    @property
    def utilization(self) -> float:
        return self.nf_in_use / self.nf_capacity


@dataclass
class Topology:
    ues: list[UeNode]
    base_stations: dict[int, BaseStation]
    domains: dict[int, SecurityDomain]

    def ue(self, ue_id: int) -> UeNode:
        return self.ues[ue_id]

    def domain_of_bs(self, bs_id: int) -> SecurityDomain:
        return self.domains[self.base_stations[bs_id].domain_id]

    def candidate_bs(self, ue: UeNode, domain_id: int) -> BaseStation:
        """The UE's nearest base station inside ``domain_id``."""
        members = [self.base_stations[b] for b in sorted(self.domains[domain_id].bs_members)]
        return _nearest(ue.position, members)

    def to_dict(self) -> dict:
        return {
            "ues": [
                {
                    "id": u.id,
                    "class": u.ue_class.value,
                    "max_latency": u.req.max_latency,
                    "security_level": u.req.security_level.value,
                    "position": list(u.position),
                    "rf_fingerprint_quality": u.rf_fingerprint_quality,
                    "base_quality": {str(k): v for k, v in sorted(u.base_quality.items())},
                    "home_domain": u.home_domain,
                    "attached_bs": u.attached_bs,
                }
                for u in self.ues
            ],
            "base_stations": [
                {"id": b.id, "domain_id": b.domain_id, "position": list(b.position)}
                for b in sorted(self.base_stations.values(), key=lambda b: b.id)
            ],
            "domains": [
                {
                    "id": d.id,
                    "name": d.name,
                    "kind": d.kind,
                    "bs_members": sorted(d.bs_members),
                    "nf_capacity": d.nf_capacity,
                    "capability_flags": {
                        "closed_loop": d.closed_loop,
                        "customized_security": d.customized_security,
                        "interdomain_collab": d.interdomain_collab,
                    },
                }
                for d in sorted(self.domains.values(), key=lambda d: d.id)
            ],
        }

    def dump(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _grid_positions(n: int, origin, extent) -> list[tuple[float, float]]:
    if n == 0:
        return []
    w, h = extent
    cols = max(1, math.ceil(math.sqrt(n * w / h))) if h > 0 else n
    rows = math.ceil(n / cols)
    out = []
    for i in range(n):
        r, c = divmod(i, cols)
        out.append((origin[0] + (c + 0.5) * w / cols, origin[1] + (r + 0.5) * h / rows))
    return out


def _class_pattern(n_sensor: int, n_industrial: int) -> list[UeClass]:
    # spread industrial devices evenly through the id range
    n = n_sensor + n_industrial
    out = []
    for i in range(n):
        hit = (i + 1) * n_industrial // n > i * n_industrial // n if n else False
        out.append(UeClass.INDUSTRIAL if hit else UeClass.SENSOR)
    return out


def domain_key(master_seed: int, domain_id: int) -> bytes:
    return hashlib.sha256(f"teu-key/{master_seed}/{domain_id}".encode()).digest()


def build_topology(config: "ScenarioConfig", master_seed: int | None = None) -> Topology:
    """Materialize UEs, base stations and domains from a scenario.

    Channel base qualities and RF fingerprint qualities are drawn from the
    ``topology`` stream of ``master_seed`` (defaults to ``config.run.seed``).
    """
    topo = config.topology
    seed = config.run.seed if master_seed is None else master_seed
    rng = derive_stream(seed, "topology")

    domains: dict[int, SecurityDomain] = {}
    for d in topo.domains:
        f = d.capability_flags
        domains[d.id] = SecurityDomain(
            id=d.id,
            name=d.name,
            kind=d.kind,
            nf_capacity=d.nf_capacity,
            closed_loop=f.closed_loop,
            customized_security=f.customized_security,
            interdomain_collab=f.interdomain_collab,
            key=domain_key(seed, d.id),
        )
    stations: dict[int, BaseStation] = {}
    for b in topo.base_stations:
        if b.domain not in domains:
            raise ConfigError(f"base station {b.id} references unknown domain {b.domain}")
        stations[b.id] = BaseStation(b.id, b.domain, tuple(b.position))
        domains[b.domain].bs_members.add(b.id)

    n_s = topo.ue_counts.get("Sensor", 0)
    n_i = topo.ue_counts.get("Industrial", 0)
    classes = _class_pattern(n_s, n_i)
    positions = _grid_positions(len(classes), topo.layout.origin, topo.layout.extent)
    lo, hi = topo.channel.base_range
    rf_lo, rf_hi = topo.channel.rf_range
    ues = []
    for i, (cls, pos) in enumerate(zip(classes, positions)):
        r = topo.requirements[cls.value]
        ue = UeNode(
            id=i,
            ue_class=cls,
            req=SecurityRequirement(r.max_latency, SecurityLevel(r.security_level)),
            position=pos,
            rf_fingerprint_quality=rng.uniform(rf_lo, rf_hi),
        )
        for b in sorted(stations):
            ue.base_quality[b] = rng.uniform(lo, hi)
            ue.channel_quality[b] = ue.base_quality[b]
        ues.append(ue)
    topology = Topology(ues, stations, domains)
    if stations:
        for ue in ues:
            bs = nearest_bs(ue, topology)
            ue.attached_bs = bs.id
            ue.home_domain = ue.serving_domain = bs.domain_id
    return topology


def _nearest(pos, stations: list[BaseStation]) -> BaseStation:
    best, best_d = None, math.inf
    for bs in stations:
        d = (bs.position[0] - pos[0]) ** 2 + (bs.position[1] - pos[1]) ** 2
        if d < best_d or (d == best_d and bs.id < best.id):
            best, best_d = bs, d
    return best


def nearest_bs(ue: UeNode, topology: Topology) -> BaseStation:
    """Closest base station by Euclidean distance, lowest id on ties."""
    if not topology.base_stations:
        raise EmptyTopologyError("topology has no base stations")
    return _nearest(ue.position, list(topology.base_stations.values()))


def sample_channel_quality(ue: UeNode, bs: BaseStation, rng: RngStream, jitter_sd: float = 0.05) -> float:
    """Base quality plus Gaussian jitter, clamped to [0, 1]; stored on the UE."""
    base = ue.base_quality.get(bs.id, 0.5)
    q = base + rng.normal(0.0, jitter_sd) if jitter_sd > 0 else base
    q = min(1.0, max(0.0, q))
    ue.channel_quality[bs.id] = q
    return q
