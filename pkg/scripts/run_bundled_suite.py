"""Run criteria, scatter and report on the bundled scenarios and print the summary."""
import argparse
import sys
from pathlib import Path

from scatterlab.lab.cli import main


def run(out: Path, jobs: int) -> int:
    for argv in (["criteria", "--out", str(out), "--jobs", str(jobs)],
                 ["scatter", "--out", str(out), "--jobs", str(jobs), "--both-signs"],
                 ["report", str(out)]):
        code = main(argv)
        if code != 0:
            print(f"{argv[0]} exited with {code}", file=sys.stderr)
            return code
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("runs/bundled"))
    ap.add_argument("--jobs", type=int, default=4)
    args = ap.parse_args()
    sys.exit(run(args.out, args.jobs))
