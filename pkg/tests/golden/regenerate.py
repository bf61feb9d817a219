"""Rewrite the committed golden traces.

Run only after an intentional change to simulation behaviour:

    python tests/golden/regenerate.py
"""

from pathlib import Path

from es3asim.config import parse_scenario
from es3asim.simulation import simulate
from es3asim.kernel import write_trace

HERE = Path(__file__).parent


def main() -> None:
    for scenario in sorted(HERE.glob("*.json")):
        out = simulate(parse_scenario(scenario))
        stem = scenario.stem
        digest = write_trace(out.trace, HERE / f"{stem}.trace.jsonl")
        (HERE / f"{stem}.sha256").write_text(digest + "\n", encoding="utf-8")
        print(f"{stem}: {len(out.trace)} events {digest[:16]}")


if __name__ == "__main__":
    main()
