#!/usr/bin/env python3
"""Run every shipped figure config and print its metric summary.

Usage: python scripts/run_figures.py [outdir] [fig1 fig2 ...]
"""

import sys
import time
from pathlib import Path

from dispflow.experiment import load_config, run_experiment

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def main(argv):
    outroot = Path(argv[1]) if len(argv) > 1 else Path("out")
    wanted = set(argv[2:])
    for cfg_path in sorted(CONFIG_DIR.glob("*.cfg")):
        if wanted and cfg_path.stem not in wanted:
            continue
        cfg = load_config(cfg_path)
        t0 = time.time()
        report = run_experiment(cfg, str(outroot / cfg.name))
        summary = "  ".join(report.lines())
        print(f"{cfg.name}: {summary}  [{time.time() - t0:.1f}s]")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
