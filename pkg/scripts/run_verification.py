"""Run every verification suite at full size and write JSON and CSV reports.

    python scripts/run_verification.py --out results/verify
"""
import argparse
import time
from pathlib import Path
from types import SimpleNamespace

from adaswitch import harness as hs
from adaswitch.cli import run_verify


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/verify"))
    ap.add_argument("--T", type=int, default=4096)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    for suite in ("invariants", "potential", "doubling", "baseline", "constrained", "coordinate", "lea"):
        start = time.perf_counter()
        reports, ok = run_verify(SimpleNamespace(suite=suite, T=args.T, seed=args.seed,
                                                 negative_controls=False))
        secs = time.perf_counter() - start
        hs.write_reports_json(args.out / f"{suite}.json", reports, meta={"suite": suite, "T": args.T})
        bounds = [r for r in reports if isinstance(r, hs.BoundReport)]
        if bounds:
            hs.write_reports_csv(args.out / f"{suite}.csv", bounds)
            w = hs.worst_report(bounds)
            extra = f"worst slack {w.slack:.4g} ({w.theorem_id}, {w.adversary}, u={w.comparator})"
        else:
            extra = ", ".join(f"{r.kind} max {r.worst_violation:.3g}" for r in reports)
        print(f"{suite:12s} {'ok  ' if ok else 'FAIL'} {len(reports):5d} checks {secs:6.1f}s  {extra}")

    from adaswitch.cli import negative_control_reports
    controls = negative_control_reports(args.T)
    hs.write_reports_json(args.out / "controls.json", controls, meta={"T": args.T})
    caught = sum(not (r.sound if isinstance(r, hs.BoundReport) else r.passed) for r in controls)
    print(f"{'controls':12s} {caught}/{len(controls)} deliberately broken checks flagged")


if __name__ == "__main__":
    main()
