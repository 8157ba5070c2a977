"""Run every config in configs/ through the CLI and print one line per run.

    python3 scripts/run_all.py [--only phase distortion] [--out out]
"""

import argparse
import pathlib
import sys
import time

from lpembed.harness import cli
from lpembed.harness.config import load_config

ROOT = pathlib.Path(__file__).resolve().parents[1]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", nargs="*", help="config stems to run (default: all)")
    ap.add_argument("--out", default="out", help="parent output directory")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)

    status = 0
    for path in sorted((ROOT / "configs").glob("*.conf")):
        if args.only and path.stem not in args.only:
            continue
        cfg = load_config(path)
        t0 = time.perf_counter()
        code = cli.main([cfg.experiment, "--config", str(path), "-q",
                         "--out", str(pathlib.Path(args.out) / path.stem),
                         "--threads", str(args.threads)])
        print(f"{path.stem:16s} exit={code} {time.perf_counter() - t0:7.1f} s")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
