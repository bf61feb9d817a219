"""Authentication latency and orchestration overhead in the IoT case study.

Trains the agent once on a long run, then evaluates it frozen on fresh
seeds and writes the per-request samples as CSV.

    python demos/case_study_latency.py --out out/latency
"""

import argparse
from pathlib import Path

import numpy as np

from es3asim.config import default_scenario
from es3asim.harness import run, train_agent


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/latency")
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()

    cfg = default_scenario()
    model = train_agent(cfg, seed=100, duration_ms=200_000.0)
    pls, path, ovh = [], [], []
    for seed in range(1, args.seeds + 1):
        res = run(cfg, seed=seed, model=model, out_dir=Path(args.out) / f"seed_{seed}")
        pls.append(res.report.pls_success_latency)
        path.append(res.report.pls_path_latency)
        ovh.extend(res.report.overhead_samples)
    pls, path = np.concatenate(pls), np.concatenate(path)
    print(f"successful PLS authentications: {pls.size}")
    print(f"mean PLS latency     {pls.mean():6.2f} ms")
    print(f"mean decision cost   {np.mean(ovh):6.2f} ms")
    print(f"PLS path <= 10 ms    {np.mean(path <= 10.0):6.1%}")


if __name__ == "__main__":
    main()
