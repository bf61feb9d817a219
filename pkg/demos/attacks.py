"""Worm-driven DDoS filtering and learning-stage attacks.

Part one enables the SIR worm and the DDoS flood it drives, then reports
how much malicious traffic each architecture filters. Part two trains an
agent with poisoned feedback and perturbed observations and compares its
latency with a cleanly trained one and with the centralized baseline.

    python demos/attacks.py --out out/attacks
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from es3asim.config import default_scenario
from es3asim.harness import run, train_agent

SEEDS = [1, 2, 3, 4, 5]


def threat(end_ms, ddos=None, poison=None, adversarial=None):
    def atk(kind, value, **kw):
        return {"kind": kind, "intensity": value or 0.0, "start": 0.0, "end": end_ms,
                "enabled": value is not None, **kw}

    return {"sir": {"enabled": True}, "attacks": [atk("Ddos", ddos, target=1), atk("Poisoning", poison),
                                                  atk("Adversarial", adversarial)]}


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/attacks")
    args = ap.parse_args()
    out = Path(args.out)
    cfg = default_scenario()
    dur = cfg.run.duration_ms

    ddos = cfg.with_updates(threat=threat(dur, ddos=100.0))
    print("DDoS filtering rate (malicious packets dropped / sent)")
    for mode in ("es3a", "dtm", "centralized"):
        reps = [run(ddos, seed=s, mode=mode, digest=False).report for s in SEEDS]
        rate = np.mean([r.filtering_rate for r in reps])
        honest = np.mean([r.honest_drop_rate for r in reps])
        print(f"  {mode:<12} {rate:.3f}   honest dropped {honest:.3f}")
        if mode == "es3a":
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "sir_es3a_seed1.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t_ms", "S", "I", "R"])
                w.writerows(reps[0].sir_series)

    clean = train_agent(cfg)
    poisoned = train_agent(cfg.with_updates(threat=threat(200_000.0, poison=0.3, adversarial=1)))
    hit_cfg = cfg.with_updates(threat=threat(dur, poison=0.3, adversarial=1))

    def mean_latency(c, **kw):
        return np.mean([run(c, seed=s, digest=False, **kw).report.mean_latency for s in SEEDS])

    a = mean_latency(cfg, model=clean)
    b = mean_latency(hit_cfg, model=poisoned)
    c = mean_latency(cfg, mode="centralized")
    print("\nmean latency under poisoning 0.3 and one-step perturbation")
    print(f"  es3a clean     {a:6.2f} ms")
    print(f"  es3a attacked  {b:6.2f} ms  (+{b - a:.2f})")
    print(f"  centralized    {c:6.2f} ms  (+{c - a:.2f})")


if __name__ == "__main__":
    main()
