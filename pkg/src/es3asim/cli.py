"""Command line: ``es3asim run|train|sweep|validate|replay``.

Exit status is 0 on success, 2 when the scenario fails validation and 1 on
any other error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ValidationError, parse_scenario
from .harness import run, sweep, train_agent
from .orchestration import AgentModel
from .metrics import replay

MODES = ("es3a", "centralized", "dtm")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="es3asim", description="Multi-domain security orchestration simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def scenario(p):
        p.add_argument("--scenario", default="iot_case_study", help="scenario JSON path or bundled name")

    p = sub.add_parser("run", help="simulate one cell")
    scenario(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--scale", type=float, action="append", help="request-rate multiplier (last one wins)")
    p.add_argument("--model", help="agent checkpoint JSON from 'train' (evaluated frozen)")
    p.add_argument("--out", default="out")

    p = sub.add_parser("train", help="train a learning agent and save its checkpoint")
    scenario(p)
    p.add_argument("--seed", type=int, default=100)
    p.add_argument("--mode", choices=("es3a", "dtm"), default="es3a")
    p.add_argument("--duration", type=float, default=200_000.0, help="training run length in ms")
    p.add_argument("--out", default="agent.json")

    p = sub.add_parser("sweep", help="simulate the (mode, scale, seed) product")
    scenario(p)
    p.add_argument("--seed", type=int, action="append", help="repeatable; default 1..5")
    p.add_argument("--mode", choices=MODES, action="append", help="repeatable; default all")
    p.add_argument("--scale", type=float, action="append", help="repeatable; default 1 2 4 8 16")
    p.add_argument("--out", default="out")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("validate", help="check a scenario and print its hash")
    scenario(p)

    p = sub.add_parser("replay", help="re-derive metrics from a JSONL trace")
    p.add_argument("trace")
    p.add_argument("--out", help="directory for metrics.json and samples.csv")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.cmd == "replay":
            rep = replay(args.trace)
            if args.out:
                rep.write(args.out)
            print(json.dumps(rep.summary(), sort_keys=True, indent=1))
            return 0
        cfg = parse_scenario(args.scenario)
        if args.cmd == "validate":
            from .config import scenario_hash

            print(f"ok {scenario_hash(cfg)}")
            return 0
        if args.cmd == "train":
            model = train_agent(cfg, args.seed, args.duration, args.mode)
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            model.save(args.out)
            print(f"saved {sum(len(r) for r in model.q_table.values())} q-values to {args.out}")
            return 0
        if args.cmd == "run":
            scale = args.scale[-1] if args.scale else None
            model = AgentModel.load(args.model) if args.model else None
            res = run(cfg, args.seed, args.mode, args.out, scale=scale, model=model)
            print(json.dumps({"scenario_hash": res.scenario_hash, "seed": res.seed, "mode": res.mode,
                              "trace": res.trace_path, "trace_digest": res.trace_digest,
                              **res.report.summary()}, sort_keys=True, indent=1))
            return 0
        results = sweep(cfg, args.seed or [1, 2, 3, 4, 5], args.scale or [1, 2, 4, 8, 16],
                        args.mode or list(MODES), args.out, args.workers)
        failed = [r for r in results if not r.ok]
        for r in failed:
            print(f"cell {r.mode}/{r.scale:g}/{r.seed} failed: {r.error}", file=sys.stderr)
        print(f"{len(results) - len(failed)}/{len(results)} cells ok; summary in {Path(args.out) / 'sweep_summary.csv'}")
        return 1 if failed else 0
    except ValidationError as exc:
        for path, msg in exc.violations:
            print(f"invalid: {path}: {msg}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
