"""Metric collection as a pure pass over an event trace.

Every number in a :class:`MetricsReport` is derived from raw sample arrays
held in the same report, and those arrays are read back from the annotated
payloads of ``AuthComplete``, ``PolicyDecision``, ``FilterBatch``,
``SirTick`` and ``MetricSample`` events. A serialized JSONL trace therefore
yields the same report as the live one.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .kernel import EventKind, SimEvent, read_trace

OUTCOME_FIELDS = ("req", "ue", "cls", "method", "status", "domain", "home", "t0", "latency",
                  "overhead", "offset", "wait", "service", "infected")
FILTER_FIELDS = ("mal_total", "mal_dropped", "honest_total", "honest_dropped")


@dataclass
class MetricsReport:
    outcomes: dict[str, list] = field(default_factory=lambda: {k: [] for k in OUTCOME_FIELDS})
    overhead_samples: list[float] = field(default_factory=list)
    filter_counts: dict[str, int] = field(default_factory=lambda: {k: 0 for k in FILTER_FIELDS})
    sir_series: list[tuple[float, int, int, int]] = field(default_factory=list)
    load_series: list[tuple[float, int, int, int]] = field(default_factory=list)
    pls_deadline_ms: float = 10.0

    # --- raw views -------------------------------------------------------
    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.outcomes[name])

    @property
    def n(self) -> int:
        return len(self.outcomes["latency"])

    def _mask(self, status: str | None = None, method: str | None = None) -> np.ndarray:
        m = np.ones(self.n, dtype=bool)
        if status is not None:
            m &= self.column("status") == status
        if method is not None:
            m &= self.column("method") == method
        return m

    @property
    def latencies(self) -> np.ndarray:
        return self.column("latency").astype(float)

    @property
    def pls_success_latency(self) -> np.ndarray:
        """Wait plus service of successful first-try PLS authentications."""
        m = self._mask("Ok", "PLS")
        return (self.column("wait").astype(float) + self.column("service").astype(float))[m] if self.n else np.array([])

    @property
    def pls_path_latency(self) -> np.ndarray:
        """Delay from policy distribution to completion, successful PLS only."""
        m = self._mask("Ok", "PLS")
        if not self.n:
            return np.array([])
        tot = self.column("offset").astype(float) + self.column("wait").astype(float) + self.column("service").astype(float)
        return tot[m]

    # --- aggregates ------------------------------------------------------
    def summary(self) -> dict:
        lat = self.latencies
        pls = self.pls_success_latency
        path = self.pls_path_latency
        ovh = np.asarray(self.overhead_samples, dtype=float)
        status = self.column("status") if self.n else np.array([])
        return {
            "requests": self.n,
            "mean_latency_ms": _mean(lat),
            "median_latency_ms": _q(lat, 50),
            "p95_latency_ms": _q(lat, 95),
            "mean_success_latency_ms": _mean(lat[status == "Ok"]) if self.n else None,
            "mean_pls_success_latency_ms": _mean(pls),
            "pls_path_within_deadline": float((path <= self.pls_deadline_ms).mean()) if path.size else None,
            "mean_overhead_ms": _mean(ovh),
            "timeouts": int((status == "Timeout").sum()),
            "access_denied": int((status == "AccessDenied").sum()),
            "filtering_rate": self.filtering_rate,
            "filtering_rate_by_convention": self.filter_counts["mal_total"] == 0,
            "honest_drop_rate": self.honest_drop_rate,
            "malicious_packets": self.filter_counts["mal_total"],
            "honest_packets": self.filter_counts["honest_total"],
        }

    @property
    def filtering_rate(self) -> float:
        """Dropped malicious over total malicious; 1.0 when there were none."""
        c = self.filter_counts
        return c["mal_dropped"] / c["mal_total"] if c["mal_total"] else 1.0

    @property
    def honest_drop_rate(self) -> float:
        c = self.filter_counts
        return c["honest_dropped"] / c["honest_total"] if c["honest_total"] else 0.0

    @property
    def mean_latency(self) -> float:
        return _mean(self.latencies)

    # --- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "summary": self.summary(),
            "filter_counts": dict(self.filter_counts),
            "sir_series": [list(r) for r in self.sir_series],
            "load_series": [list(r) for r in self.load_series],
            "overhead_samples": list(self.overhead_samples),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def samples_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(OUTCOME_FIELDS)
        for row in zip(*(self.outcomes[k] for k in OUTCOME_FIELDS)):
            w.writerow(row)
        return buf.getvalue()

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(self.to_json(), encoding="utf-8")
        (out / "samples.csv").write_text(self.samples_csv(), encoding="utf-8")


def _mean(x) -> float | None:
    x = np.asarray(x, dtype=float)
    return float(x.mean()) if x.size else None


def _q(x, pct) -> float | None:
    x = np.asarray(x, dtype=float)
    return float(np.percentile(x, pct)) if x.size else None


def collect(trace: Iterable[SimEvent], pls_deadline_ms: float = 10.0) -> MetricsReport:
    rep = MetricsReport(pls_deadline_ms=pls_deadline_ms)
    out = rep.outcomes
    fc = rep.filter_counts
    for ev in trace:
        k = ev.kind
        p = ev.payload
        if k is EventKind.AUTH_COMPLETE:
            for f in OUTCOME_FIELDS:
                out[f].append(p[f])
        elif k is EventKind.POLICY_DECISION:
            rep.overhead_samples.append(p["overhead"])
        elif k is EventKind.FILTER_BATCH:
            for d in p.get("domains", ()):
                for f in FILTER_FIELDS:
                    fc[f] += d[f]
        elif k is EventKind.SIR_TICK and "S" in p:
            rep.sir_series.append((ev.time, p["S"], p["I"], p["R"]))
        elif k is EventKind.METRIC_SAMPLE:
            for d in p.get("domains", ()):
                rep.load_series.append((ev.time, d["id"], d["in_use"], d["waiting"]))
    return rep


def replay(path: str | Path, pls_deadline_ms: float = 10.0) -> MetricsReport:
    """Re-derive metrics from a JSONL trace file."""
    return collect(read_trace(path), pls_deadline_ms)
