"""Two-stage orchestration: a tabular epsilon-greedy policy agent (stage 1)
and the security automation manager that forwards its policies to domain
SMUs and returns outcomes to the agent (stage 2).
"""

from __future__ import annotations

import json
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

from .kernel import EventKind, RngStream, Simulator
from .network import SecurityDomain, Topology, UeClass, UeNode
from .security import (
    AuthMethod,
    AuthOutcome,
    AuthStatus,
    Normal,
    TrustContextToken,
    teu_issue,
    teu_verify,
)
from .trust import TrustRecord

FAILURE_PENALTY = 1000.0


class NoFeasibleAction(RuntimeError):
    pass


class UnknownDomain(KeyError):
    pass


class OrphanOutcome(KeyError):
    pass


class TokenVerificationFailed(RuntimeError):
    pass


@dataclass(frozen=True, slots=True)
class StateVector:
    ue_class: UeClass
    req_latency_bucket: int
    channel_bucket: int
    load_buckets: tuple[int, ...]
    security_factor_bucket: int

    def key(self) -> str:
        loads = ".".join(str(b) for b in self.load_buckets)
        return f"{self.ue_class.value}|{self.req_latency_bucket}|{self.channel_bucket}|{loads}|{self.security_factor_bucket}"

    @classmethod
    def from_key(cls, key: str) -> "StateVector":
        c, r, ch, loads, sf = key.split("|")
        lb = tuple(int(x) for x in loads.split(".")) if loads else ()
        return cls(UeClass(c), int(r), int(ch), lb, int(sf))


class Action(NamedTuple):
    method: AuthMethod
    domain_id: int
    slot_offset: float

    def key(self) -> str:
        return f"{self.method.value}@{self.domain_id}+{self.slot_offset:g}"

    @classmethod
    def from_key(cls, key: str) -> "Action":
        m, rest = key.split("@")
        d, off = rest.split("+")
        return cls(AuthMethod(m), int(d), float(off))


@dataclass(frozen=True)
class SecurityPolicy:
    ue_id: int
    method: AuthMethod
    domain_id: int
    slot_offset: float
    t_th: float

    def __post_init__(self):
        if self.slot_offset < 0:
            raise ValueError("slot_offset must be >= 0")
        if not 0 < self.t_th < 1:
            raise ValueError("t_th must lie in (0, 1)")


def check_policy(policy: SecurityPolicy, ue: UeNode, topology: Topology) -> None:
    if policy.domain_id not in topology.domains:
        raise UnknownDomain(policy.domain_id)
    if ue.ue_class is UeClass.INDUSTRIAL and policy.method is AuthMethod.PLS:
        raise ValueError(f"industrial UE {ue.id} assigned bare PLS")


@dataclass(frozen=True)
class Discretizer:
    latency_bounds: tuple[float, ...] = (10.0, 50.0)
    channel_bounds: tuple[float, ...] = (0.25, 0.5, 0.75)
    load_bounds: tuple[float, ...] = (0.25, 0.5, 0.75)
    delay_bounds: tuple[float, ...] = (25.0, 100.0)

    @classmethod
    def from_config(cls, a) -> "Discretizer":
        return cls(tuple(a.latency_bounds), tuple(a.channel_bounds), tuple(a.load_bounds), tuple(a.delay_bounds))

    def latency(self, max_latency: float) -> int:
        return bisect_left(self.latency_bounds, max_latency)

    def channel(self, qf: float) -> int:
        return bisect_right(self.channel_bounds, qf)

    def load(self, in_use: int, capacity: int) -> int:
        return bisect_right(self.load_bounds, in_use / capacity)

    def delay(self, avg_ms: float) -> int:
        return bisect_right(self.delay_bounds, avg_ms)

    def ranges(self, n_domains: int) -> list[int]:
        """Number of buckets per perturbable feature, in ``features()`` order."""
        return [len(self.latency_bounds) + 1, len(self.channel_bounds) + 1] + [len(self.load_bounds) + 1] * n_domains + [
            len(self.delay_bounds) + 1
        ]


@dataclass
class MetricsWindow:
    """Exponentially weighted recent authentication delay."""

    avg_delay_ms: float = 0.0
    weight: float = 0.05
    samples: int = 0

    def push(self, latency_ms: float) -> None:
        if self.samples == 0:
            self.avg_delay_ms = latency_ms
        else:
            self.avg_delay_ms += self.weight * (latency_ms - self.avg_delay_ms)
        self.samples += 1


def observe_state(ue: UeNode, topology: Topology, metrics: MetricsWindow, disc: Discretizer | None = None) -> StateVector:
    d = disc or Discretizer()
    bs = ue.attached_bs
    q = ue.channel_quality.get(bs, ue.base_quality.get(bs, 0.0)) if bs is not None else 0.0
    loads = tuple(d.load(dom.nf_in_use, dom.nf_capacity) for _, dom in sorted(topology.domains.items()))
    return StateVector(
        ue.ue_class,
        d.latency(ue.req.max_latency),
        d.channel(q * ue.rf_fingerprint_quality),
        loads,
        d.delay(metrics.avg_delay_ms),
    )


def features(s: StateVector) -> list[int]:
    return [s.req_latency_bucket, s.channel_bucket, *s.load_buckets, s.security_factor_bucket]


def with_features(s: StateVector, f: Sequence[int]) -> StateVector:
    n = len(s.load_buckets)
    return StateVector(s.ue_class, f[0], f[1], tuple(f[2 : 2 + n]), f[2 + n])


def feasible_actions(ue: UeNode, domain_ids: Sequence[int], slot_offsets: Sequence[float]) -> list[Action]:
    """Action set in index order: domain, then method (PLS before AKA), then offset.

    Industrial UEs never get bare PLS.
    """
    methods = [AuthMethod.AKA] if ue.ue_class is UeClass.INDUSTRIAL else [AuthMethod.PLS, AuthMethod.AKA]
    return [Action(m, d, float(o)) for d in sorted(domain_ids) for m in methods for o in slot_offsets]


@dataclass
class AgentModel:
    lr: float = 0.1
    discount: float = 0.9
    epsilon: float = 0.2
    epsilon_start: float = 0.2
    epsilon_end: float = 0.01
    frozen: bool = False
    q_table: dict[StateVector, dict[Action, float]] = field(default_factory=dict)

    @classmethod
    def from_config(cls, a) -> "AgentModel":
        return cls(lr=a.lr, discount=a.discount, epsilon=a.epsilon_start,
                   epsilon_start=a.epsilon_start, epsilon_end=a.epsilon_end)

    def q(self, s: StateVector, a: Action) -> float:
        row = self.q_table.get(s)
        return row.get(a, 0.0) if row else 0.0

    def greedy_index(self, s: StateVector, actions: Sequence[Action]) -> int:
        row = self.q_table.get(s)
        if not row:
            return 0
        best, best_v = 0, row.get(actions[0], 0.0)
        for i in range(1, len(actions)):
            v = row.get(actions[i], 0.0)
            if v > best_v:
                best, best_v = i, v
        return best

    def value(self, s: StateVector, actions: Sequence[Action]) -> float:
        if not actions:
            return 0.0
        row = self.q_table.get(s)
        if not row:
            return 0.0
        return max(row.get(a, 0.0) for a in actions)

    def update(self, s: StateVector, a: Action, reward: float,
               next_state: StateVector | None = None, next_actions: Sequence[Action] = ()) -> float:
        target = reward
        if next_state is not None and self.discount > 0:
            target += self.discount * self.value(next_state, next_actions)
        row = self.q_table.setdefault(s, {})
        old = row.get(a, 0.0)
        new = old + self.lr * (target - old)
        row[a] = new
        return new

    def set_progress(self, frac: float) -> None:
        """Linear epsilon decay; ``frac`` is the elapsed fraction of the run."""
        if self.frozen:
            self.epsilon = 0.0
            return
        frac = min(1.0, max(0.0, frac))
        eps = self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
        self.epsilon = min(self.epsilon, eps)

    def to_checkpoint(self) -> dict:
        entries = {}
        for s in sorted(self.q_table, key=StateVector.key):
            for a, v in sorted(self.q_table[s].items(), key=lambda kv: kv[0].key()):
                entries[f"{s.key()}#{a.key()}"] = v
        return {"lr": self.lr, "discount": self.discount, "epsilon_start": self.epsilon_start,
                "epsilon_end": self.epsilon_end, "q": entries}

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_checkpoint(), fh, sort_keys=True, indent=1)

    @classmethod
    def from_checkpoint(cls, data: dict, evaluation: bool = True) -> "AgentModel":
        eps0, eps1 = data.get("epsilon_start", 0.2), data.get("epsilon_end", 0.01)
        m = cls(lr=data.get("lr", 0.1), discount=data.get("discount", 0.9), epsilon=eps0,
                epsilon_start=eps0, epsilon_end=eps1)
        for k, v in data["q"].items():
            sk, ak = k.split("#")
            m.q_table.setdefault(StateVector.from_key(sk), {})[Action.from_key(ak)] = float(v)
        if evaluation:
            m.frozen = True
            m.epsilon = m.epsilon_start = m.epsilon_end = 0.0
        return m

    @classmethod
    def load(cls, path, evaluation: bool = True) -> "AgentModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_checkpoint(json.load(fh), evaluation)


@dataclass(frozen=True)
class Decision:
    policy: SecurityPolicy
    action: Action
    action_index: int
    explored: bool
    overhead_ms: float


def sample_overhead(rng: RngStream, overhead: Normal = Normal(2.98, 0.5)) -> float:
    return rng.truncated_normal(overhead.mean, overhead.sd, 0.0)


def agent_decide(state: StateVector, model: AgentModel, rng: RngStream, actions: Sequence[Action],
                 ue_id: int = -1, t_th: float = 0.4, overhead_ms: float | None = None,
                 overhead: Normal = Normal(2.98, 0.5)) -> Decision:
    """Epsilon-greedy choice over ``actions``; greedy ties go to the lowest index.

    The orchestration overhead is drawn from ``rng`` unless the caller
    supplies ``overhead_ms`` (the simulator draws it from its latency stream
    so every architecture pays the same control-plane cost).
    """
    if not actions:
        raise NoFeasibleAction(f"no feasible action for UE {ue_id}")
    explored = False
    if not model.frozen and model.epsilon > 0 and rng.random() < model.epsilon:
        idx = rng.integers(len(actions))
        explored = True
    else:
        idx = model.greedy_index(state, actions)
    a = actions[idx]
    if overhead_ms is None:
        overhead_ms = sample_overhead(rng, overhead)
    pol = SecurityPolicy(ue_id, a.method, a.domain_id, a.slot_offset, t_th)
    return Decision(pol, a, idx, explored, overhead_ms)


def reward_for(outcome: AuthOutcome) -> float:
    r = -outcome.latency
    if outcome.status in (AuthStatus.TIMEOUT, AuthStatus.ACCESS_DENIED):
        r -= FAILURE_PENALTY
    return r


def feedback(outcome: AuthOutcome, model: AgentModel, pending: dict, next_state: StateVector | None = None,
             next_actions: Sequence[Action] = (), transform: Callable[[float], float] | None = None) -> AgentModel:
    """Apply one outcome to the Q-table.

    ``pending`` maps request ids to the ``(state, action)`` they were decided
    in; the entry is consumed. ``transform`` can rewrite the reward before
    the update (reward-channel poisoning hooks in here).
    """
    key = outcome.request_id
    if key not in pending:
        raise OrphanOutcome(key)
    state, action = pending.pop(key)
    r = reward_for(outcome)
    if transform is not None:
        r = transform(r)
    if not model.frozen:
        model.update(state, action, r, next_state, next_actions)
    return model


class SecurityAutomationManager:
    """Stage 2: forwards policies to domain SMUs as scheduled events."""

    def __init__(self, sim: Simulator, topology: Topology):
        self.sim = sim
        self.topology = topology
        self.tokens: dict[int, TrustContextToken] = {}

    def distribute(self, policy: SecurityPolicy, now: float | None = None, request_id: int | None = None):
        now = self.sim.clock if now is None else now
        if policy.domain_id not in self.topology.domains:
            raise UnknownDomain(policy.domain_id)
        ue = self.topology.ue(policy.ue_id)
        payload = {
            "req": request_id,
            "ue": policy.ue_id,
            "method": policy.method.value,
            "domain": policy.domain_id,
            "offset": policy.slot_offset,
        }
        src = ue.serving_domain
        if src is not None and src != policy.domain_id:
            src_dom = self.topology.domains[src]
            if policy.ue_id in src_dom.trust_store:
                tok = teu_issue(policy.ue_id, src_dom, now)
                self.tokens[request_id if request_id is not None else -1] = tok
                payload["token"] = tok.tag.hex()[:16]
                payload["from"] = src
        return self.sim.schedule(now + policy.slot_offset, EventKind.POLICY_DISTRIBUTED, payload)


def switch_domain(ue: UeNode, src: SecurityDomain, dst: SecurityDomain, now: float,
                  token: TrustContextToken | None = None, freshness_ms: float = 5000.0) -> TrustContextToken:
    """Move a UE's security service from ``src`` to ``dst``.

    ``src`` issues (or has issued) a TEU token, ``dst`` verifies it and seeds
    its trust record from the snapshot unless it already holds fresher
    evidence of its own. On a failed verification nothing changes.
    """
    if ue.serving_domain != src.id:
        raise ValueError(f"UE {ue.id} is served by {ue.serving_domain}, not {src.id}")
    tok = token if token is not None else teu_issue(ue.id, src, now)
    if tok.ue_id != ue.id or tok.issuing_domain != src.id or not teu_verify(tok, src.key, now, freshness_ms):
        raise TokenVerificationFailed(f"token for UE {ue.id} from domain {src.id} rejected")
    cur = dst.trust_store.get(ue.id)
    if cur is None or not cur.own_evidence or cur.last_update < tok.last_update:
        dst.trust_store[ue.id] = TrustRecord(ue.id, dst.id, tok.alpha, tok.beta, tok.last_update, own_evidence=False)
    ue.serving_domain = dst.id
    return tok
