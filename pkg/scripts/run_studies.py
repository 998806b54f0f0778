"""Run the three PCT studies and write their reports into one directory.

Usage::

    python scripts/run_studies.py --out-dir results --replicates 20

Each study produces ``<name>.json`` plus ``<name>_series.csv``.
"""

import argparse
import sys
import time
from pathlib import Path

from infsens.cli import main as cli

STUDIES = ("illustrative", "scenario-study", "noise-sweep")


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out-dir", default="results")
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="optional YAML with ExperimentSpec / MisConfig overrides")
    p.add_argument("--only", choices=STUDIES, action="append", help="restrict to these studies")
    args = p.parse_args(argv)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for study in args.only or STUDIES:
        cmd = [study, "--seed", str(args.seed), "--replicates", str(args.replicates),
               "--out", str(out_dir / f"{study.replace('-', '_')}.json")]
        if args.config:
            cmd += ["--config", args.config]
        start = time.monotonic()
        rc = cli(cmd)
        print(f"{study}: exit {rc} after {time.monotonic() - start:.0f}s", file=sys.stderr)
        if rc:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())
