"""Run every shipped experiment through the CLI and write outputs under runs/.

    python3 scripts/reproduce.py [--out runs] [--no-timing]

Solves each experiment, verifies traces that have certified constants,
estimates the log-sum-exp constants and runs the gradient-descent benchmark.
Exits nonzero if any step fails.
"""

import argparse
import json
import sys
from pathlib import Path

from cubicreg import cli

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--out", default=str(ROOT / "runs"))
    ap.add_argument("--no-timing", action="store_true")
    args = ap.parse_args(argv)
    out = Path(args.out)
    timing = ["--no-timing"] if args.no_timing else []
    failures = []

    def step(*argv):
        print("$ cubicreg " + " ".join(str(a) for a in argv), flush=True)
        code = cli.main([str(a) for a in argv])
        if code != 0:
            failures.append((argv[0], argv[1], code))

    for path in sorted(CONFIGS.glob("*.json")):
        doc = json.loads(path.read_text())
        if "problem" not in doc:
            continue
        if "bench_out" in doc:
            step("bench", path, "--out", out / f"{path.stem}.csv", *timing)
            continue
        prefix = out / path.stem
        step("solve", path, "--out", prefix, *timing)
        step("verify", f"{prefix}.json", path, "--out", out / f"{path.stem}.report.json")
    step("estimate", CONFIGS / "logsumexp.json", "--box", "1", "--out",
         out / "logsumexp.estimate.json")

    for cmd, target, code in failures:
        print(f"FAILED: {cmd} {target} (exit {code})", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
