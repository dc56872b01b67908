"""Paired-trial wealth comparison on the three synthetic markets.

    python scripts/synthetic_market.py --lam 0.1 --C 1 --baseline-C 1
"""
import argparse
from pathlib import Path

import numpy as np

from adaswitch.portfolio import curve_rows, trial_study, write_curves
from adaswitch.vector import CoordinateBaseline, CoordinateOLO


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--models", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--T", type=int, default=2000)
    ap.add_argument("--lam", type=float, default=0.1)
    ap.add_argument("--C", type=float, default=1.0)
    ap.add_argument("--baseline-C", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=None, help="directory for per-model curve CSVs")
    args = ap.parse_args()

    for model in args.models:
        study = trial_study(model, args.trials, args.T, {
            "ours": lambda: CoordinateOLO(5, args.C, 1.0, args.lam),
            "baseline": lambda: CoordinateBaseline(5, args.baseline_C, 1.0, args.lam),
        }, args.seed, args.lam)
        ours, base = study["ours"], study["baseline"]
        wins = float(np.mean(ours.finals > base.finals))
        print(f"model {model}: ours {ours.mean[-1]:.6g} +- {ours.std[-1]:.3g}, "
              f"baseline {base.mean[-1]:.6g} +- {base.std[-1]:.3g}, paired wins {wins:.0%}")
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            write_curves(args.out / f"model{model}.csv", curve_rows(study))


if __name__ == "__main__":
    main()
