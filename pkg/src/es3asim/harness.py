"""Single runs and Cartesian sweeps with on-disk result emission."""

from __future__ import annotations

import csv
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .config import ScenarioConfig, scenario_hash
from .kernel import trace_digest, write_trace
from .metrics import MetricsReport
from .orchestration import AgentModel
from .simulation import RunOutput, simulate

SUMMARY_FIELDS = ("mode", "scale", "seed", "mean_latency_ms", "p95_latency_ms", "filtering_rate", "timeouts")


@dataclass
class RunResult:
    scenario_hash: str
    seed: int
    mode: str
    scale: float
    report: MetricsReport | None
    trace_path: str | None = None
    trace_digest: str | None = None
    topology_digest: str | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def summary_row(self) -> dict:
        row = {"mode": self.mode, "scale": self.scale, "seed": self.seed}
        s = self.report.summary() if self.report is not None else {}
        for k in SUMMARY_FIELDS[3:]:
            row[k] = s.get(k)
        return row


def train_agent(config: ScenarioConfig, seed: int = 100, duration_ms: float = 200_000.0,
                mode: str = "es3a", model: AgentModel | None = None) -> AgentModel:
    """Train an agent over one long run and return a frozen copy of it.

    The copy is greedy (epsilon 0) and no longer updates, so evaluation runs
    that share it stay independent of each other.
    """
    cfg = config.with_updates(run={"seed": int(seed), "duration_ms": float(duration_ms), "mode": mode})
    out = simulate(cfg, model=model)
    if out.model is None:
        raise ValueError(f"mode {mode!r} has no agent to train")
    return AgentModel.from_checkpoint(out.model.to_checkpoint())


def run(config: ScenarioConfig, seed: int | None = None, mode: str | None = None,
        out_dir: str | Path | None = None, digest: bool = True, scale: float | None = None,
        model: AgentModel | None = None) -> RunResult:
    """Simulate one (config, seed, mode) cell.

    With ``out_dir`` the cell's ``metrics.json``, ``samples.csv`` and
    ``trace.jsonl`` are written there. ``seed``, ``mode`` and ``scale``
    override the config's run section. ``model`` replaces the fresh agent
    of learning modes and is copied first, so the caller's model is never
    modified.
    """
    upd = {}
    if seed is not None:
        upd["seed"] = int(seed)
    if mode is not None:
        upd["mode"] = str(mode).lower()
    if scale is not None:
        upd["scale"] = float(scale)
    cfg = config.with_updates(run=upd) if upd else config
    if model is not None:
        model = AgentModel.from_checkpoint(model.to_checkpoint(), evaluation=model.frozen)
    out: RunOutput = simulate(cfg, model=model)
    res = RunResult(scenario_hash(cfg), cfg.run.seed, cfg.run.mode, cfg.run.scale, out.report,
                    topology_digest=out.topology_digest)
    if out_dir is not None:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        out.report.write(d)
        path = d / "trace.jsonl"
        res.trace_digest = write_trace(out.trace, path)
        res.trace_path = str(path)
    elif digest:
        res.trace_digest = trace_digest(out.trace)
    return res


def _cell(args) -> RunResult:
    config, seed, mode, scale, out_dir = args
    try:
        return run(config, seed, mode, out_dir, digest=False, scale=scale)
    except Exception as exc:  # one failed cell must not abort its siblings
        return RunResult(scenario_hash(config), int(seed), str(mode), float(scale), None,
                         error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}")


def sweep(config: ScenarioConfig, seeds: Sequence[int], scale_factors: Sequence[float], modes: Sequence[str],
          out_dir: str | Path | None = None, workers: int = 1) -> list[RunResult]:
    """Run every (mode, scale, seed) cell, returned in that nested order.

    ``scale`` multiplies the configured requests per UE per second.
    """
    if not seeds or not scale_factors or not modes:
        raise ValueError("seeds, scale factors and modes must be nonempty")
    base = config.run.scale
    cells = []
    for m in modes:
        for sc in scale_factors:
            for s in seeds:
                d = None
                if out_dir is not None:
                    d = Path(out_dir) / str(m).lower() / f"scale_{sc:g}" / f"seed_{s}"
                cells.append((config, s, m, base * float(sc), d))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_cell, cells))
    else:
        results = [_cell(c) for c in cells]
    for r, c in zip(results, cells):
        r.scale = float(c[3]) / base
    if out_dir is not None:
        write_summary(results, Path(out_dir) / "sweep_summary.csv")
    return results


def write_summary(results: Sequence[RunResult], path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in results:
            w.writerow(r.summary_row())
