"""Handicapped-baseline study: ours at C = 1 against the baseline at C = 5,
over switching weights and horizons.

Prints the ratio of mean final wealth (ours / baseline) on a grid, which
shows where the C = 1 learner overtakes.

    python scripts/lambda_sweep.py --horizons 1000 2000 4000 8000
"""
import argparse

from adaswitch.portfolio import trial_study
from adaswitch.vector import CoordinateBaseline, CoordinateOLO


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--models", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--lams", type=float, nargs="+", default=[0.1, 0.5, 1.0])
    ap.add_argument("--horizons", type=int, nargs="+", default=[1000, 2000, 4000, 8000])
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--baseline-C", type=float, default=5.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    T_max = max(args.horizons)
    print("model  lam   " + "  ".join(f"T={T:<6d}" for T in args.horizons))
    for model in args.models:
        for lam in args.lams:
            study = trial_study(model, args.trials, T_max, {
                "ours": lambda: CoordinateOLO(5, 1.0, 1.0, lam),
                "baseline": lambda: CoordinateBaseline(5, args.baseline_C, 1.0, lam),
            }, args.seed, lam)
            ratios = [study["ours"].mean[T - 1] / study["baseline"].mean[T - 1] for T in args.horizons]
            print(f"{model:5d}  {lam:<4g}  " + "  ".join(f"{r:<8.3g}" for r in ratios))


if __name__ == "__main__":
    main()
