"""Mean authentication latency as the request rate grows, per architecture.

Writes the full sweep tree plus ``latency_vs_scale.csv`` (one row per mode
and scale, averaged over seeds) ready for plotting.

    python demos/scaling_sweep.py --out out/scaling
"""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from es3asim.config import default_scenario
from es3asim.harness import sweep

MODES = ["es3a", "dtm", "centralized"]


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/scaling")
    ap.add_argument("--scales", type=float, nargs="+", default=[1, 2, 4, 8, 16])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    res = sweep(default_scenario(), args.seeds, args.scales, MODES, args.out, args.workers)
    cells = defaultdict(list)
    for r in res:
        if r.ok:
            cells[r.mode, r.scale].append(r.report.mean_latency)
    path = Path(args.out) / "latency_vs_scale.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "scale", "mean_latency_ms", "sd_ms", "seeds"])
        for (mode, scale), lat in sorted(cells.items()):
            w.writerow([mode, scale, f"{np.mean(lat):.3f}", f"{np.std(lat):.3f}", len(lat)])
    print(f"{'scale':>6} " + " ".join(f"{m:>12}" for m in MODES))
    for sc in sorted({float(s) for s in args.scales}):
        print(f"{sc:>6g} " + " ".join(f"{np.mean(cells[m, sc]):>10.1f}ms" for m in MODES))
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
