"""Security enable units, SMU dispatch, NF slot pool and TEU tokens.

Authentication is modeled as a latency/success process, not as real
cryptography. AKA always verifies an honest identity; its latency is the sum
of a RAN round trip, a core round trip and processing. Physical-layer
authentication (PLS) succeeds with a logistic probability in the product of
channel quality and RF-fingerprint quality and falls back to AKA on failure.
"""

from __future__ import annotations

import hashlib
import hmac
import math
import struct
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum

from .kernel import RngStream
from .network import BaseStation, SecurityDomain, Topology, UeNode


class ResourceExhausted(RuntimeError):
    pass


class PolicyDomainMismatch(ValueError):
    pass


class AccessDenied(PermissionError):
    pass


class UnknownUe(KeyError):
    pass


class AuthMethod(str, Enum):
    AKA = "AKA"
    PLS = "PLS"
    PLS_FALLBACK_AKA = "PLS_FallbackAKA"


class AuthStatus(str, Enum):
    OK = "Ok"
    TIMEOUT = "Timeout"
    ACCESS_DENIED = "AccessDenied"


@dataclass
class AuthOutcome:
    method_used: AuthMethod
    success: bool
    latency: float
    domain_id: int
    status: AuthStatus = AuthStatus.OK
    ue_id: int | None = None
    request_id: int | None = None
    service_ms: float = 0.0
    wait_ms: float = 0.0
    offset_ms: float = 0.0
    overhead_ms: float = 0.0

    def __post_init__(self):
        if self.success and self.latency <= 0:
            raise ValueError("a successful authentication takes positive time")


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float = 0.0


@dataclass
class ServiceParams:
    aka_ran: Normal = Normal(4.0, 1.0)
    aka_core: Normal = Normal(12.0, 2.0)
    aka_proc: Normal = Normal(4.0, 1.0)
    pls_latency: Normal = Normal(8.6, 0.8)
    pls_attempt: Normal = Normal(12.0, 1.5)
    gate_sharpness: float = 10.0
    gate_threshold: float = 0.5
    overhead: Normal = Normal(2.98, 0.5)
    nf_timeout_ms: float = 500.0
    packet_service_ms: float = 1.0
    packet_queue_limit: int = 65536
    token_freshness_ms: float = 5000.0

    @classmethod
    def from_config(cls, s) -> "ServiceParams":
        n = lambda spec: Normal(spec.mean, spec.sd)  # noqa: E731
        return cls(
            aka_ran=n(s.aka.ran_rtt),
            aka_core=n(s.aka.core_rtt),
            aka_proc=n(s.aka.proc),
            pls_latency=n(s.pls.latency),
            pls_attempt=n(s.pls.attempt),
            gate_sharpness=s.pls.gate_sharpness,
            gate_threshold=s.pls.gate_threshold,
            overhead=n(s.orchestration_overhead),
            nf_timeout_ms=s.nf_timeout_ms,
            packet_service_ms=s.packet_service_ms,
            packet_queue_limit=s.packet_queue_limit,
            token_freshness_ms=s.token_freshness_ms,
        )


@dataclass(slots=True)
class AkaDraw:
    ran: float
    core: float
    proc: float

    @property
    def total(self) -> float:
        return self.ran + self.core + self.proc


@dataclass(slots=True)
class PlsDraw:
    gate_u: float
    latency: float
    attempt: float


def _tn(rng: RngStream, n: Normal) -> float:
    return rng.truncated_normal(n.mean, n.sd, 0.0)


def draw_aka(rng: RngStream, p: ServiceParams) -> AkaDraw:
    return AkaDraw(_tn(rng, p.aka_ran), _tn(rng, p.aka_core), _tn(rng, p.aka_proc))


def draw_pls(rng: RngStream, p: ServiceParams) -> PlsDraw:
    return PlsDraw(rng.random(), _tn(rng, p.pls_latency), _tn(rng, p.pls_attempt))


def pls_success_probability(qf: float, sharpness: float, threshold: float) -> float:
    x = sharpness * (qf - threshold)
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def resolve_auth(method: AuthMethod, qf: float, pls: PlsDraw, aka: AkaDraw, p: ServiceParams,
                 domain_id: int, ue_id: int | None = None) -> AuthOutcome:
    """Turn pre-drawn randomness into an outcome for ``method``."""
    if method is AuthMethod.AKA:
        t = aka.total
        return AuthOutcome(AuthMethod.AKA, True, t, domain_id, ue_id=ue_id, service_ms=t)
    if pls.gate_u < pls_success_probability(qf, p.gate_sharpness, p.gate_threshold):
        return AuthOutcome(AuthMethod.PLS, True, pls.latency, domain_id, ue_id=ue_id, service_ms=pls.latency)
    t = pls.attempt + aka.total
    return AuthOutcome(AuthMethod.PLS_FALLBACK_AKA, True, t, domain_id, ue_id=ue_id, service_ms=t)


def aka_authenticate(ue: UeNode, domain: SecurityDomain, rng: RngStream, params: ServiceParams | None = None) -> AuthOutcome:
    p = params or ServiceParams()
    t = draw_aka(rng, p).total
    return AuthOutcome(AuthMethod.AKA, True, t, domain.id, ue_id=ue.id, service_ms=t)


def pls_authenticate(ue: UeNode, bs: BaseStation, rng: RngStream, params: ServiceParams | None = None) -> AuthOutcome:
    """PLS against ``bs`` using the UE's latest sampled channel quality."""
    p = params or ServiceParams()
    q = ue.channel_quality.get(bs.id, ue.base_quality.get(bs.id, 0.0))
    pls = draw_pls(rng, p)
    aka = draw_aka(rng, p)
    return resolve_auth(AuthMethod.PLS, q * ue.rf_fingerprint_quality, pls, aka, p, bs.domain_id, ue.id)


def smu_execute(policy, domain: SecurityDomain, ue: UeNode, topology: Topology, rng: RngStream,
                params: ServiceParams | None = None, t_ue: float | None = None) -> AuthOutcome:
    """Execute a policy inside ``domain``.

    Checks the policy targets this domain and that the UE clears the
    policy's trust threshold, then runs the selected SEU. One NF slot is
    acquired for the outcome; the caller releases it after ``latency``.
    """
    if policy.domain_id != domain.id:
        raise PolicyDomainMismatch(f"policy for domain {policy.domain_id} sent to {domain.id}")
    if t_ue is None:
        rec = domain.trust_store.get(ue.id)
        t_ue = rec.t_d if rec is not None else 0.5
    if t_ue < policy.t_th:
        raise AccessDenied(f"UE {ue.id} trust {t_ue:.3f} below {policy.t_th}")
    if domain.nf_in_use >= domain.nf_capacity:
        raise ResourceExhausted(f"domain {domain.id} has no free NF slot")
    domain.acquire()
    if AuthMethod(policy.method) is AuthMethod.AKA:
        return aka_authenticate(ue, domain, rng, params)
    bs = topology.candidate_bs(ue, domain.id)
    return pls_authenticate(ue, bs, rng, params)


class NfPool:
    """Counted NF slots of one domain with a FIFO wait queue.

    Queue entries are any objects with ``enqueued_at`` and ``done``
    attributes; entries flagged ``done`` (timed out elsewhere) are skipped.
    """

    def __init__(self, domain: SecurityDomain):
        self.domain = domain
        self.queue: deque = deque()
        self.acquired = 0
        self.released = 0

    def try_acquire(self) -> bool:
        if self.domain.nf_in_use < self.domain.nf_capacity:
            self.domain.nf_in_use += 1
            self.acquired += 1
            return True
        return False

    def enqueue(self, item) -> None:
        self.queue.append(item)

    def release(self) -> None:
        self.domain.release()
        self.released += 1

    def pop_waiting(self, now: float, packet_timeout: float = math.inf):
        """Hand a slot to the oldest live waiter, or return None."""
        q = self.queue
        while q:
            item = q.popleft()
            if item.done:
                continue
            if getattr(item, "is_packet", False) and now - item.enqueued_at > packet_timeout:
                item.done = True
                continue
            if self.try_acquire():
                return item
            q.appendleft(item)
            return None
        return None

    @property
    def waiting(self) -> int:
        return sum(1 for it in self.queue if not it.done)


# --- trust enable unit -----------------------------------------------------

_LAYOUT = struct.Struct("<QQddddd")
TAG_LEN = 32


@dataclass(frozen=True)
class TrustContextToken:
    ue_id: int
    issuing_domain: int
    alpha: float
    beta: float
    t_d: float
    last_update: float
    issued_at: float
    tag: bytes = b""
    raw: bytes | None = field(default=None, compare=False, repr=False)

    def body(self) -> bytes:
        if self.raw is not None:
            return self.raw
        return _LAYOUT.pack(self.ue_id, self.issuing_domain, self.alpha, self.beta,
                            self.t_d, self.last_update, self.issued_at)

    def to_bytes(self) -> bytes:
        return self.body() + self.tag

    @classmethod
    def from_bytes(cls, data: bytes) -> "TrustContextToken":
        if len(data) != _LAYOUT.size + TAG_LEN:
            raise ValueError("malformed token")
        raw = bytes(data[: _LAYOUT.size])
        fields = _LAYOUT.unpack(raw)
        return cls(*fields, tag=bytes(data[_LAYOUT.size:]), raw=raw)

    def tampered(self, **changes) -> "TrustContextToken":
        """Copy with fields changed but the original tag kept."""
        return replace(self, raw=None, **changes)


def _tag(key: bytes, body: bytes) -> bytes:
    return hmac.new(key, body, hashlib.sha256).digest()


def teu_issue(ue_id: int, domain: SecurityDomain, now: float) -> TrustContextToken:
    rec = domain.trust_store.get(ue_id)
    if rec is None:
        raise UnknownUe(ue_id)
    tok = TrustContextToken(ue_id, domain.id, rec.alpha, rec.beta, rec.t_d, rec.last_update, float(now))
    return replace(tok, tag=_tag(domain.key, tok.body()))


def teu_verify(token: TrustContextToken, issuer_key: bytes, now: float | None = None,
               freshness_ms: float = 5000.0) -> bool:
    try:
        ok = hmac.compare_digest(_tag(issuer_key, token.body()), token.tag)
    except (struct.error, TypeError):
        return False
    if not ok:
        return False
    if now is not None and not (0.0 <= now - token.issued_at <= freshness_ms):
        return False
    return True
