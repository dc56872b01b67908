"""Command-line front end: verification sweeps, single episodes, backtests."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Sequence

import numpy as np

from . import harness as hs
from .harness import AdversarySpec, Theorem
from .portfolio import (
    backtest_prices,
    curve_rows,
    dump_curves,
    load_price_csv,
    PriceFormatError,
    single_curve_rows,
    trial_study,
)
from .potential import LearnerConfig, PotentialRangeError
from .scalar import (
    BaselineLearner,
    ConstrainedLearner,
    DomainInterval,
    DoublingLearner,
    GradientBoundError,
    MetaLearner,
    PotentialLearner,
)
from .vector import CoordinateBaseline, CoordinateOLO, LEALearner, SimplexPoint

LEARNERS = ("potential", "baseline", "doubling", "meta", "coordinate", "lea")
SUITES = ("all", "invariants", "potential", "baseline", "doubling", "constrained", "coordinate", "lea")
U_GRID = (0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 5.0, -5.0, 10.0, -10.0)
SWEEP_LAMS = (0.0, 0.1, 1.0)
SWEEP_GS = (1.0, 15.0)
SWEEP_CS = (0.1, 1.0, 10.0)


class UsageError(ValueError):
    pass


def _positive(name):
    def parse(s):
        try:
            v = float(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {s!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"{name} must be > 0, got {s}")
        return v
    return parse


def _nonneg(name, kind=float):
    def parse(s):
        try:
            v = kind(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a {kind.__name__}, got {s!r}") from None
        if v < 0:
            raise argparse.ArgumentTypeError(f"{name} must be >= 0, got {s}")
        return v
    return parse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaswitch", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, T_default):
        sp.add_argument("--C", type=_positive("--C"), default=1.0)
        sp.add_argument("--G", type=_positive("--G"), default=1.0)
        sp.add_argument("--lambda", dest="lam", type=_nonneg("--lambda"), default=0.0)
        sp.add_argument("--T", type=_nonneg("--T", int), default=T_default)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--output", default="-", help="file path, or - for stdout")

    v = sub.add_parser("verify", help="run invariant sweeps and bound checks")
    common(v, 4096)
    v.add_argument("--suite", choices=SUITES, default="all")
    v.add_argument("--negative-controls", action="store_true",
                   help="also run deliberately mis-configured checks (reported, never fatal)")

    s = sub.add_parser("simulate", help="run one episode and write its ledger")
    common(s, 100)
    s.add_argument("--learner", choices=LEARNERS, default="potential")
    s.add_argument("--adversary", choices=[k.value for k in hs.AdversaryKind], default="sign")
    s.add_argument("--magnitude", type=_positive("--magnitude"), default=None)
    s.add_argument("--alpha", type=_positive("--alpha"), default=None)
    s.add_argument("--d", type=_positive("--d"), default=None)
    s.add_argument("--period", type=_positive("--period"), default=64.0)

    b = sub.add_parser("backtest-synthetic", help="paired trials on a synthetic market")
    common(b, 2000)
    b.add_argument("--model", type=int, choices=(1, 2, 3), default=1)
    b.add_argument("--trials", type=_positive("--trials"), default=50)
    b.add_argument("--baseline-C", dest="baseline_C", type=_positive("--baseline-C"), default=None)

    c = sub.add_parser("backtest-csv", help="backtest on a price CSV")
    common(c, 0)
    c.add_argument("--prices", required=True)
    c.add_argument("--learner", choices=("coordinate", "baseline"), default="coordinate")
    return p


# ---------------------------------------------------------------------------
# learners


def make_learner(name: str, C: float, G: float, lam: float, d: int | None = None,
                 alpha: float | None = None):
    if name == "potential":
        return PotentialLearner(LearnerConfig(C, G, lam, alpha))
    if alpha is not None:
        raise UsageError("--alpha applies only to --learner potential")
    if name == "baseline":
        return BaselineLearner(C, G, lam)
    if name == "doubling":
        return DoublingLearner(C, G, lam)
    if name == "meta":
        return MetaLearner.over_baseline(C, G, lam)
    if name == "coordinate":
        return CoordinateOLO(d or 2, C, G, lam)
    if name == "lea":
        return LEALearner(SimplexPoint.uniform(d or 3), G, lam)
    raise UsageError(f"unknown learner {name}")


# ---------------------------------------------------------------------------
# verify


def _scalar_sweep(theorem, factory, T, seed):
    reports = []
    for lam in SWEEP_LAMS:
        for G in SWEEP_GS:
            for C in SWEEP_CS:
                cfg = dict(C=C, G=G, lam=lam)
                reports += hs.verify_bounds(lambda: factory(C, G, lam), hs.scalar_suite(G, seed),
                                            U_GRID, T, theorem, cfg, config=cfg)
    return reports


def _constrained_reports(T, seed):
    out = []
    for x_star, center in ((0.0, 0.0), (0.0, 0.5), (0.5, 0.5)):
        dom = DomainInterval(0.0, 1.0, x_star)
        for lam in SWEEP_LAMS:
            learner = ConstrainedLearner(PotentialLearner(LearnerConfig(1.0, 1.0, lam)), dom, 1.0)
            ledger = hs.run_episode(learner, AdversarySpec("sign", 1.0, center=center), T)
            cfg = dict(C=1.0, G=1.0, lam=lam, x_star=x_star, center=center)
            out += hs.check_ledger(ledger, Theorem.CONSTRAINED, cfg, (0.0, 0.25, 0.5, 1.0), cfg)
            out.append(interval_switching_report(ledger, D=1.0, C=1.0, config=cfg))
    return out


def interval_switching_report(ledger: hs.EpisodeLedger, D: float, C: float,
                              config: dict | None = None) -> hs.BoundReport:
    """Worst window ``[T1, T2]`` of the switching-cost bound, all windows checked."""
    T = ledger.T
    sw = np.concatenate([[0.0], np.cumsum(ledger.switch_costs)])
    best = (np.inf, 0.0, 0.0, 0, 0)
    for T1 in range(1, T):
        T2 = np.arange(T1 + 1, T + 1)
        meas = sw[T2 - 1] - sw[T1 - 1]
        bound = hs.theoretical_bound(Theorem.INTERVAL_SWITCHING, dict(D=D, C=C), 0.0, T2 - T1)
        score = (bound - meas) / np.maximum(1.0, bound)
        k = int(np.argmin(score))
        if score[k] < best[0]:
            best = (score[k], float(meas[k]), float(bound[k]), T1, int(T2[k]))
    _, meas, bound, T1, T2 = best
    cfg = dict(config or {}, T1=T1, T2=T2)
    return hs.BoundReport([0.0], meas, bound, bound - meas, Theorem.INTERVAL_SWITCHING.value,
                          ledger.adversary, T, T2, cfg)


def _coordinate_reports(T, seed):
    out = []
    us = [np.array(v) for v in ((0.0, 0.0), (1.0, -1.0), (5.0, 0.0), (-2.0, 10.0), (0.5, 0.5))]
    for lam in SWEEP_LAMS:
        for G in SWEEP_GS:
            for C in SWEEP_CS:
                cfg = dict(C=C, G=G, lam=lam)
                out += hs.verify_bounds(lambda: CoordinateOLO(2, C, G, lam), hs.lea_suite(G, 2, seed),
                                        us, T, Theorem.COORDINATE, cfg, config=dict(cfg, d=2))
    return out


def _lea_reports(T, seed, dims=(2, 5, 10)):
    out = []
    for d in dims:
        prior = SimplexPoint.uniform(d)
        us = [SimplexPoint.vertex(d, i).weights for i in range(d)] + [prior.weights]
        for lam in SWEEP_LAMS:
            for G in SWEEP_GS:
                cfg = dict(G=G, lam=lam, prior=prior.weights)
                out += hs.verify_bounds(lambda: LEALearner(prior, G, lam), hs.lea_suite(G, d, seed),
                                        us, T, Theorem.LEA, cfg, config=dict(G=G, lam=lam, d=d))
    return out


def negative_control_reports(T: int) -> list:
    """Checks that must fail; they show the verifiers can detect a violation."""
    out = [hs.invariant_sweep("residual_delta", dict(t=range(1, 201), n_s=50, lams=(1.0,), Gs=(1.0,),
                                                     alpha=1.0, control=True))]
    heat = hs.invariant_sweep("heat_pde", dict(t=range(1, 101), n_s=20, lams=(0.0,), Gs=(1.0,),
                                              diffusivity=1.0, control=True))
    out.append(heat)
    for alpha, lam in ((1.0, 10.0), (0.1, 1.0)):
        cfg = dict(C=1.0, G=1.0, lam=lam)
        out += hs.verify_bounds(lambda: PotentialLearner(LearnerConfig(1.0, 1.0, lam, alpha)),
                                [AdversarySpec("sign", 1.0)], (0.0,), T, Theorem.POTENTIAL, cfg,
                                config=dict(cfg, alpha=alpha), control=True)
    return out


def run_verify(args) -> tuple[list, bool]:
    suite, T, seed = args.suite, args.T, args.seed
    reports: list = []
    if suite in ("all", "invariants"):
        reports.append(hs.invariant_sweep("residual_delta"))
        reports.append(hs.invariant_sweep("heat_pde", dict(lams=(0.0, 0.1, 1.0, 10.0))))
        reports.append(hs.invariant_sweep("switch_lemma", dict(t=range(1, 301), n_s=50)))
        reports.append(hs.invariant_sweep("monotone_policy", dict(t=range(1, 301), n_s=50)))
    if suite in ("all", "potential"):
        reports += _scalar_sweep(Theorem.POTENTIAL, lambda C, G, lam: PotentialLearner(LearnerConfig(C, G, lam)), T, seed)
    if suite in ("all", "doubling"):
        reports += _scalar_sweep(Theorem.DOUBLING, DoublingLearner, T, seed)
    if suite in ("all", "baseline"):
        reports += _scalar_sweep(Theorem.BASELINE, BaselineLearner, T, seed)
    if suite in ("all", "constrained"):
        reports += _constrained_reports(min(T, 1024), seed)
    if suite in ("all", "coordinate"):
        reports += _coordinate_reports(T, seed)
    if suite in ("all", "lea"):
        reports += _lea_reports(T, seed)
    ok = all(_report_ok(r) for r in reports)
    if args.negative_controls:
        reports += negative_control_reports(min(T, 4096))
    return reports, ok


def _report_ok(r) -> bool:
    return r.sound if isinstance(r, hs.BoundReport) else r.passed


def _verify_rows(reports) -> list[list]:
    rows = []
    for r in reports:
        if isinstance(r, hs.BoundReport):
            u = r.comparator[0] if len(r.comparator) == 1 else " ".join(repr(v) for v in r.comparator)
            rows.append([r.theorem_id, r.adversary, u, r.T, repr(r.measured_regret),
                         repr(r.bound_value), repr(r.slack)])
        else:
            rows.append([r.kind, "", "", r.points, repr(r.worst_violation), repr(r.tolerance),
                         repr(r.tolerance - r.worst_violation)])
    return rows


# ---------------------------------------------------------------------------
# output


def _open_out(path):
    if path == "-":
        return _Stdout()
    return open(path, "w", newline="", encoding="utf-8")


class _Stdout(io.StringIO):
    def __exit__(self, *exc):
        sys.stdout.write(self.getvalue())
        return super().__exit__(*exc)


def _write_json(path, doc):
    with _open_out(path) as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=hs._json_default)
        fh.write("\n")


def _write_csv(path, header, rows):
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------------------
# commands


def cmd_verify(args) -> int:
    reports, ok = run_verify(args)
    if args.format == "json":
        _write_json(args.output, {"rng": hs.RNG_ALGORITHM, "suite": args.suite, "T": args.T,
                                  "passed": ok, "reports": hs.report_dicts(reports)})
    else:
        _write_csv(args.output, hs.BOUND_CSV_FIELDS, _verify_rows(reports))
    failed = sum(not _report_ok(r) for r in reports if not r.control)
    print(f"verify: {len(reports)} checks, {failed} non-control failures", file=sys.stderr)
    return 0 if ok else 1


def cmd_simulate(args) -> int:
    learner = make_learner(args.learner, args.C, args.G, args.lam,
                           None if args.d is None else int(args.d), args.alpha)
    d = getattr(learner, "d", 1)
    center = 1.0 / d if args.learner == "lea" else 0.0
    adv = AdversarySpec(args.adversary, args.magnitude or args.G, seed=args.seed,
                        period=args.period, center=center)
    ledger = hs.run_episode(learner, adv, args.T)
    rows = ledger.to_rows()
    if args.format == "json":
        _write_json(args.output, {"rng": hs.RNG_ALGORITHM, "learner": args.learner,
                                  "adversary": adv.label, "lambda": args.lam, "G": args.G,
                                  "C": args.C, "T": args.T, "rounds": rows,
                                  "regret_at_zero": hs.augmented_regret(ledger, np.zeros(d))})
    else:
        def fmt(v):
            return repr(v[0]) if len(v) == 1 else " ".join(repr(a) for a in v)
        _write_csv(args.output, ("t", "x", "g", "switch"),
                   [[r["t"], fmt(r["x"]), fmt(r["g"]), repr(r["switch"])] for r in rows])
    return 0


def cmd_backtest_synthetic(args) -> int:
    C, lam, G = args.C, args.lam, args.G
    Cb = args.baseline_C or C
    d = 5
    study = trial_study(args.model, int(args.trials), args.T,
                        {"ours": lambda: CoordinateOLO(d, C, G, lam),
                         "baseline": lambda: CoordinateBaseline(d, Cb, G, lam)},
                        args.seed, lam)
    meta = dict(model=args.model, trials=int(args.trials), T=args.T, seed=args.seed,
                lam=lam, G=G, C=C, baseline_C=Cb)
    rows = curve_rows(study)
    with _open_out(args.output) as fh:
        dump_curves(fh, rows, args.format, meta)
    return 0


def cmd_backtest_csv(args) -> int:
    ps = load_price_csv(args.prices)
    d = len(ps.symbols)
    learner = (CoordinateOLO(d, args.C, args.G, args.lam) if args.learner == "coordinate"
               else CoordinateBaseline(d, args.C, args.G, args.lam))
    curve = backtest_prices(learner, ps, args.lam)
    rows = single_curve_rows(args.learner, curve)
    meta = dict(prices=args.prices, symbols=ps.symbols, lam=args.lam, G=args.G, C=args.C,
                posterior_G=curve.meta["posterior_G"])
    with _open_out(args.output) as fh:
        dump_curves(fh, rows, args.format, meta)
    print(f"posterior G (largest |price move|) = {curve.meta['posterior_G']!r}", file=sys.stderr)
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "backtest-synthetic": cmd_backtest_synthetic,
    "backtest-csv": cmd_backtest_csv,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except PotentialRangeError as e:
        print(f"error: numeric range exceeded: {e}", file=sys.stderr)
        return 3
    except GradientBoundError as e:
        print(f"error: {e} (pass a larger --G)", file=sys.stderr)
        return 2
    except (UsageError, PriceFormatError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
