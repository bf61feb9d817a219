"""Architecture modes and the two comparison policies."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .kernel import RngStream
from .network import SecurityLevel, Topology, UeClass, UeNode, nearest_bs
from .orchestration import (
    AgentModel,
    Decision,
    SecurityPolicy,
    StateVector,
    agent_decide,
    feasible_actions,
)
from .security import AuthMethod


class Mode(str, Enum):
    ES3A = "es3a"
    CENTRALIZED = "centralized"
    DTM = "dtm"


@dataclass(frozen=True)
class ArchitectureMode:
    mode: Mode
    # trust observations applied as they happen (else batched global sync)
    closed_loop: bool
    # per-UE thresholds by security level
    customized_security: bool
    # auth may be offloaded to a non-home domain
    interdomain_collab: bool
    # per-domain trust stores whose own evidence is shared between domains
    distributed_trust: bool
    uses_agent: bool

    @classmethod
    def of(cls, mode: "Mode | str") -> "ArchitectureMode":
        return _MODES[Mode(mode.lower() if isinstance(mode, str) else mode)]


_MODES = {
    Mode.ES3A: ArchitectureMode(Mode.ES3A, True, True, True, True, True),
    Mode.DTM: ArchitectureMode(Mode.DTM, True, False, False, True, True),
    Mode.CENTRALIZED: ArchitectureMode(Mode.CENTRALIZED, False, False, False, False, False),
}


def admission_threshold(ue: UeNode, mode: ArchitectureMode, t_th: float, t_th_robust: float) -> float:
    if mode.customized_security and ue.req.security_level is SecurityLevel.ROBUST:
        return t_th_robust
    return t_th


def centralized_policy(ue: UeNode, topology: Topology, t_th: float = 0.4) -> SecurityPolicy:
    """Nearest base station's domain, PLS for sensors, AKA otherwise, no delay."""
    bs = nearest_bs(ue, topology)
    method = AuthMethod.PLS if ue.ue_class is UeClass.SENSOR else AuthMethod.AKA
    return SecurityPolicy(ue.id, method, bs.domain_id, 0.0, t_th)


def dtm_policy(ue: UeNode, topology: Topology, model: AgentModel, rng: RngStream, state: StateVector,
               slot_offsets: Sequence[float] = (0.0, 5.0, 10.0), t_th: float = 0.4,
               overhead_ms: float | None = None) -> Decision:
    """The learning agent restricted to the UE's nearest domain."""
    home = nearest_bs(ue, topology).domain_id
    actions = feasible_actions(ue, [home], slot_offsets)
    return agent_decide(state, model, rng, actions, ue.id, t_th, overhead_ms)


def es3a_policy(ue: UeNode, topology: Topology, model: AgentModel, rng: RngStream, state: StateVector,
                slot_offsets: Sequence[float] = (0.0, 5.0, 10.0), t_th: float = 0.4,
                overhead_ms: float | None = None) -> Decision:
    actions = feasible_actions(ue, list(topology.domains), slot_offsets)
    return agent_decide(state, model, rng, actions, ue.id, t_th, overhead_ms)
