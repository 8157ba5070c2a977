"""Sweep the calibration coefficient of the m rule and report where P1 breaks.

The m rule ``m = max(1, floor(c * eta / log(1 + 1/eta) * n))`` has a free
constant c. Larger c certifies larger supports but eventually pushes the
empirical frame ratio beta/alpha past 3^(1/r). This prints one CSV row per
(c, p, r) from the certify experiment.

    python3 scripts/sweep_m_coeff.py --coeffs 0.05 0.1 0.2 0.4 --J 5000
"""

import argparse
import sys

from lpembed.harness.config import default_config
from lpembed.harness.experiments import run_certify
from lpembed.harness.report import format_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--coeffs", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.4])
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--eta", type=float, default=1.0)
    ap.add_argument("--p", type=float, nargs="+", default=[1.2, 1.5])
    ap.add_argument("--r", type=float, nargs="+", default=[0.5, 1.0])
    ap.add_argument("--J", type=int, default=None, help="LePage depth (default: automatic)")
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rows = []
    for c in args.coeffs:
        cfg = default_config("certify").with_overrides(
            n=(args.n,), eta=(args.eta,), p=tuple(args.p), r=tuple(args.r), J=args.J,
            trials=args.trials, samples=args.trials, seed=args.seed, m_coeff=c)
        res = run_certify(cfg)
        for row in res.rows:
            d = dict(zip(res.columns, row))
            cap = 3.0 ** (1.0 / d["r"])
            rows.append((c, d["p"], d["r"], d["m"], d["p1_ratio"], cap, int(d["p1_ratio"] <= cap),
                         d["kashin_min"], d["kashin_lower_bound"]))
    cols = ("m_coeff", "p", "r", "m", "p1_ratio", "ratio_cap", "within_cap", "kashin_min",
            "kashin_lower_bound")
    sys.stdout.write(format_csv(cols, rows))
    return 0


if __name__ == "__main__":
    sys.exit(main())
