"""Print median RMSE tables from reports written by ``run_studies.py``."""

import argparse
import json
from pathlib import Path


def _table(report: dict) -> list[str]:
    kind = report["meta"]["spec"]["kind"]
    lines = [f"[{kind}]"]
    for s in report["sensors"]:
        cfg = s["config"]
        where = cfg.get("dataset") or cfg.get("scenario") or f"sigma={cfg.get('sigma')}"
        value = s["rmse_train"] if kind == "illustrative" else s["rmse_test"]
        lines.append(f"  {where:<14} {s['method']:<8} {value:.4f}")
    return lines


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("reports", nargs="+", type=Path)
    args = p.parse_args(argv)
    for path in args.reports:
        print("\n".join(_table(json.loads(path.read_text()))))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
