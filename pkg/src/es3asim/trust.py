"""Beta-Bernoulli trust per (UE, domain), recency-weighted fusion, threshold
admission and rate-rule packet filtering.

Trust in one domain is the Beta posterior mean ``alpha / (alpha + beta)``
with a uniform ``(1, 1)`` prior. Malicious evidence carries a heavier
weight than benign evidence so trust falls faster than it recovers.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence


class EmptyRecordSet(ValueError):
    pass


class MixedUeError(ValueError):
    pass


class Observation(str, Enum):
    BENIGN = "Benign"
    MALICIOUS = "Malicious"


@dataclass(slots=True)
class TrustRecord:
    ue_id: int
    domain_id: int
    alpha: float = 1.0
    beta: float = 1.0
    last_update: float = 0.0
    # False while the record only holds evidence copied in from another domain
    own_evidence: bool = True

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")

    @property
    def t_d(self) -> float:
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class FusedTrust:
    ue_id: int
    t_ue: float
    contributing_domains: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class AccessDecision:
    ue_id: int | None
    allowed: bool
    t_ue: float
    threshold: float


@dataclass(slots=True)
class Packet:
    id: int
    ue_id: int
    time: float
    domain_id: int
    # ground truth, for scoring only; filtering never reads these
    malicious: bool = False
    honest: bool = True


def update_trust(record: TrustRecord, obs: Observation, now: float | None = None, w_mal: float = 2.0) -> TrustRecord:
    """Return the posterior after one observation."""
    t = record.last_update if now is None else now
    if obs is Observation.BENIGN:
        return replace(record, alpha=record.alpha + 1.0, last_update=t, own_evidence=True)
    return replace(record, beta=record.beta + w_mal, last_update=t, own_evidence=True)


def _apply(record: TrustRecord, malicious: bool, now: float, w_mal: float) -> None:
    # in-place variant used on the hot filtering path
    if malicious:
        record.beta += w_mal
    else:
        record.alpha += 1.0
    record.last_update = now
    record.own_evidence = True


def fuse_trust(records: Sequence[TrustRecord], now: float, decay_per_ms: float = 0.001) -> FusedTrust:
    """Recency-weighted mean of per-domain trust.

    Weights are ``exp(-decay * (now - last_update))`` normalized to one. A
    single record fuses to its own ``t_d``.
    """
    if not records:
        raise EmptyRecordSet("no trust records to fuse")
    ue = records[0].ue_id
    if any(r.ue_id != ue for r in records):
        raise MixedUeError("records refer to different UEs")
    if len(records) == 1:
        r = records[0]
        return FusedTrust(ue, r.t_d, ((r.domain_id, 1.0),))
    newest = max(r.last_update for r in records)
    # shift by the newest record so weights never underflow to zero together
    raw = [math.exp(-decay_per_ms * (newest - r.last_update)) for r in records]
    total = sum(raw)
    weights = [w / total for w in raw]
    t_ue = sum(w * r.t_d for w, r in zip(weights, records))
    lo = min(r.t_d for r in records)
    hi = max(r.t_d for r in records)
    t_ue = min(hi, max(lo, t_ue))
    return FusedTrust(ue, t_ue, tuple((r.domain_id, w) for r, w in zip(records, weights)))


def access_decision(t_ue: float, t_th: float, ue_id: int | None = None) -> AccessDecision:
    return AccessDecision(ue_id, t_ue >= t_th, t_ue, t_th)


@dataclass
class FilterParams:
    t_th: float = 0.4
    rate_cap_pps: float = 50.0
    window_ms: float = 100.0
    w_mal: float = 2.0
    decay_per_ms: float = 0.001
    prior_alpha: float = 1.0
    prior_beta: float = 1.0

    @property
    def allowance(self) -> float:
        return self.rate_cap_pps * self.window_ms / 1000.0


@dataclass
class FilterResult:
    passed: list[Packet] = field(default_factory=list)
    dropped: list[Packet] = field(default_factory=list)
    # (packet id, t_ue at decision time) for every packet, in processing order
    decisions: list[tuple[int, float]] = field(default_factory=list)


def filter_packets(
    domain,
    batch: Iterable[Packet],
    now: float,
    params: FilterParams | None = None,
    remote: dict[int, list[TrustRecord]] | None = None,
    thresholds: dict[int, float] | None = None,
    deferred: list | None = None,
) -> FilterResult:
    """Trust-gate one batch of packets arriving at ``domain``.

    Each packet is admitted iff the sender's fused trust is at least the
    threshold. Every packet then yields an observation: the first
    ``rate_cap * window`` packets per sender in the batch are benign, the
    rest malicious. Observations update ``domain.trust_store`` immediately,
    or are appended to ``deferred`` as ``(ue_id, malicious, now)`` when the
    caller runs without a closed loop.
    """
    p = params or FilterParams()
    store = domain.trust_store
    remote = remote or {}
    thresholds = thresholds or {}
    allowance = p.allowance
    counts: dict[int, int] = {}
    fused_cache: dict[int, float] = {}
    res = FilterResult()
    for pkt in sorted(batch, key=lambda k: (k.time, k.id)):
        u = pkt.ue_id
        rec = store.get(u)
        if rec is None:
            rec = store[u] = TrustRecord(u, domain.id, p.prior_alpha, p.prior_beta, now, own_evidence=True)
        t_ue = fused_cache.get(u)
        if t_ue is None:
            others = remote.get(u)
            t_ue = fuse_trust([rec, *others], now, p.decay_per_ms).t_ue if others else rec.t_d
        th = thresholds.get(u, p.t_th)
        if t_ue >= th:
            res.passed.append(pkt)
        else:
            res.dropped.append(pkt)
        res.decisions.append((pkt.id, t_ue))
        n = counts.get(u, 0) + 1
        counts[u] = n
        violating = n > allowance
        if deferred is not None:
            deferred.append((u, violating, now))
            fused_cache[u] = t_ue
        else:
            _apply(rec, violating, now, p.w_mal)
            fused_cache.pop(u, None)
    return res


def apply_deferred(store: dict[int, TrustRecord], pending: list, domain_id: int, w_mal: float,
                   prior_alpha: float = 1.0, prior_beta: float = 1.0) -> int:
    """Fold buffered observations into ``store``; returns how many were applied."""
    for u, malicious, t in pending:
        rec = store.get(u)
        if rec is None:
            rec = store[u] = TrustRecord(u, domain_id, prior_alpha, prior_beta, t)
        _apply(rec, malicious, t, w_mal)
    n = len(pending)
    pending.clear()
    return n


def dump_trust_csv(domains) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ue_id", "domain_id", "alpha", "beta", "t_d", "last_update"])
    for d in sorted(domains, key=lambda d: d.id):
        for u in sorted(d.trust_store):
            r = d.trust_store[u]
            w.writerow([r.ue_id, r.domain_id, repr(r.alpha), repr(r.beta), repr(r.t_d), repr(r.last_update)])
    return buf.getvalue()
