"""Run every config in configs/ into out/<name>/ and print the summaries."""

import glob
import os
import sys

from delone_ids.config import ExperimentConfig
from delone_ids.reports import run

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def main() -> int:
    status = 0
    for path in sorted(glob.glob(os.path.join(ROOT, "configs", "*.json"))):
        cfg = ExperimentConfig.load(path)
        name = os.path.splitext(os.path.basename(path))[0]
        res = run(cfg, os.path.join(ROOT, "out", name))
        print(f"== {name}")
        print(res.summary)
        status |= res.exit_code
    return status


if __name__ == "__main__":
    sys.exit(main())
