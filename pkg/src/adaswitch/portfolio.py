"""Unconstrained portfolio selection with per-share transaction costs.

Holdings ``x_t`` (shares, possibly negative) earn ``<g_t, x_t>`` where
``g_t`` is the price change over round t; changing holdings costs
``lam`` per share traded.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .harness import RNG_ALGORITHM, EpisodeLedger, make_rng


@dataclass(frozen=True)
class AssetSpec:
    noise_amp: float
    sine_amp: float
    sine_phase: float  # multiples of pi
    trend: float


@dataclass(frozen=True)
class MarketModelSpec:
    assets: tuple[AssetSpec, ...]
    period: float = 1000.0  # rounds per sine cycle

    def __post_init__(self):
        for a in self.assets:
            if abs(a.noise_amp) + abs(a.sine_amp) + abs(a.trend) > 1.0 + 1e-12:
                raise ValueError(f"asset {a} can exceed |g| = 1")

    @property
    def d(self) -> int:
        return len(self.assets)

    def deterministic_part(self, T: int) -> np.ndarray:
        t = np.arange(1, T + 1, dtype=float)[:, None]
        amp = np.array([a.sine_amp for a in self.assets])
        ph = np.array([a.sine_phase for a in self.assets])
        tr = np.array([a.trend for a in self.assets])
        return amp * np.sin((2.0 * t / self.period + ph) * np.pi) + tr


_PHASES = (0.0, 0.5, 1.0, 1.5)
_SINES = (0.4, 0.3, 0.2, 0.1)

MARKET_MODELS: dict[int, MarketModelSpec] = {
    1: MarketModelSpec(tuple(AssetSpec(n, s, p, 0.2) for n, s, p in zip((0.4, 0.5, 0.6, 0.7), _SINES, _PHASES))
                       + (AssetSpec(0.8, 0.0, 0.0, 0.2),)),
    2: MarketModelSpec(tuple(AssetSpec(n, s, p, 0.4) for n, s, p in zip((0.2, 0.3, 0.4, 0.5), _SINES, _PHASES))
                       + (AssetSpec(0.55, 0.0, 0.0, 0.45),)),
    3: MarketModelSpec(tuple(AssetSpec(n, s, p, 0.4) for n, s, p in zip((0.2, 0.3, 0.4, 0.5), _SINES, _PHASES))
                       + (AssetSpec(0.5, 0.0, 0.0, 0.5),)),
}


def gen_synthetic_market(model: int, T: int, seed: int, noise: bool = True) -> np.ndarray:
    """``(T, d)`` return matrix; ``noise=False`` gives the deterministic part."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    spec = MARKET_MODELS[int(model)]
    g = spec.deterministic_part(T)
    if noise:
        amp = np.array([a.noise_amp for a in spec.assets])
        g = g + amp * make_rng(seed).uniform(-1.0, 1.0, size=(T, spec.d))
    return g


# ---------------------------------------------------------------------------
# price data


class PriceFormatError(ValueError):
    pass


@dataclass
class PriceSeries:
    dates: list[dt.date]
    closes: np.ndarray  # (T, d)
    symbols: list[str]

    def __post_init__(self):
        self.closes = np.asarray(self.closes, dtype=float)
        if self.closes.shape != (len(self.dates), len(self.symbols)):
            raise PriceFormatError("closes must be len(dates) x len(symbols)")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise PriceFormatError("dates must be strictly increasing")
        if np.any(~np.isfinite(self.closes)) or np.any(self.closes <= 0):
            raise PriceFormatError("closes must be finite and positive")


def load_price_csv(path) -> PriceSeries:
    """Read ``date,SYM1,...,SYMd`` closes; errors cite the line number."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise PriceFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise PriceFormatError(f"{path}:1: header must be date,SYM1,...")
    symbols = header[1:]
    dates, closes = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise PriceFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            day = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise PriceFormatError(f"{path}:{lineno}: bad date {row[0]!r}") from None
        try:
            vals = [float(c) for c in row[1:]]
        except ValueError:
            raise PriceFormatError(f"{path}:{lineno}: non-numeric close") from None
        if any(not math.isfinite(v) for v in vals):
            raise PriceFormatError(f"{path}:{lineno}: non-finite close")
        if any(v <= 0 for v in vals):
            raise PriceFormatError(f"{path}:{lineno}: close must be positive")
        if dates and day <= dates[-1]:
            raise PriceFormatError(f"{path}:{lineno}: date {day} not after {dates[-1]}")
        dates.append(day)
        closes.append(vals)
    return PriceSeries(dates, np.array(closes).reshape(len(dates), len(symbols)), symbols)


def price_to_gradients(ps: PriceSeries) -> tuple[np.ndarray, float]:
    """Daily close differences and the largest absolute move seen.

    The second value is informational; backtests take G from the caller.
    """
    g = np.diff(ps.closes, axis=0)
    return g, float(np.max(np.abs(g))) if g.size else 0.0


# ---------------------------------------------------------------------------
# backtest


@dataclass
class WealthCurve:
    wealth: np.ndarray
    holdings: np.ndarray
    investment: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def final_wealth(self) -> float:
        return float(self.wealth[-1]) if self.wealth.size else 0.0


def _holdings(learner, g: np.ndarray) -> np.ndarray:
    """Predictions of a fresh learner fed the flipped returns."""
    if hasattr(learner, "replay"):
        return np.asarray(learner.replay(-g), dtype=float)
    out = np.empty_like(g)
    for t in range(g.shape[0]):
        out[t] = learner.predict()
        learner.observe(-g[t])
    return out


def backtest(learner, gradients, lam: float, prices=None,
             initial_holdings=None) -> WealthCurve:
    """Trade with ``learner`` on return matrix ``gradients`` (T x d).

    Wealth is minus the learner's augmented regret against holding nothing,
    taken from the shared ledger. ``initial_holdings`` defaults to the first
    prediction, so the opening position is not charged; pass zeros to charge
    it. ``prices`` (T x d, price paid in each round) enables investment
    tracking.
    """
    g = np.asarray(gradients, dtype=float)
    if g.ndim != 2:
        raise ValueError("gradients must be T x d")
    d = getattr(learner, "d", 1)
    if g.shape[1] != d:
        raise ValueError(f"learner has d = {d}, gradients have {g.shape[1]} columns")
    x = _holdings(learner, g).reshape(g.shape)
    ledger = EpisodeLedger(x, -g, lam, learner.G, "market")
    wealth = -ledger.prefix_regrets(np.zeros(d))
    x0 = x[:1] if initial_holdings is None else np.asarray(initial_holdings, dtype=float).reshape(1, d)
    opening = lam * float(np.abs(x[0] - x0[0]).sum()) if len(x) else 0.0
    wealth = wealth - opening
    investment = None
    if prices is not None:
        p = np.asarray(prices, dtype=float)
        if p.shape != g.shape:
            raise ValueError("prices must match gradients")
        dx = np.diff(np.vstack([x0, x]), axis=0)
        investment = np.cumsum(np.einsum("ti,ti->t", p, dx) + lam * np.abs(dx).sum(axis=1))
    return WealthCurve(wealth, x, investment)


def backtest_prices(learner, ps: PriceSeries, lam: float) -> WealthCurve:
    g, posterior_G = price_to_gradients(ps)
    curve = backtest(learner, g, lam, prices=ps.closes[:-1], initial_holdings=np.zeros(len(ps.symbols)))
    curve.meta.update(posterior_G=posterior_G, symbols=ps.symbols)
    return curve


def batch_wealth(learner, gradients, lam: float) -> np.ndarray:
    """Wealth curves for a stack of independent markets, shape ``(T, n)``.

    ``gradients`` is ``(T, d, n)``; the learner must offer ``replay``. Uses
    the same accounting as :func:`backtest` with the default opening.
    """
    g = np.asarray(gradients, dtype=float)
    x = np.asarray(learner.replay(-g), dtype=float)
    gain = np.cumsum(np.einsum("tin,tin->tn", g, x), axis=0)
    sw = np.abs(np.diff(x, axis=0)).sum(axis=1)
    sw = np.vstack([np.zeros((1, g.shape[2])), np.cumsum(sw, axis=0)])
    return gain - lam * sw[: g.shape[0]]


@dataclass
class TrialSummary:
    mean: np.ndarray
    std: np.ndarray
    finals: np.ndarray


def trial_study(model: int, n_trials: int, T: int,
                learners: Mapping[str, Callable[[], object]], base_seed: int,
                lam: float) -> dict[str, TrialSummary]:
    """Paired trials: trial k draws its market with seed ``base_seed + k``
    and every learner sees that same draw."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    markets = np.stack([gen_synthetic_market(model, T, base_seed + k) for k in range(n_trials)], axis=2)
    out = {}
    for label, make in learners.items():
        learner = make()
        if hasattr(learner, "replay"):
            curves = batch_wealth(learner, markets, lam)
        else:
            curves = np.stack([backtest(make(), markets[:, :, k], lam).wealth
                               for k in range(n_trials)], axis=1)
        out[label] = TrialSummary(curves.mean(axis=1), curves.std(axis=1), curves[-1].copy())
    return out


# ---------------------------------------------------------------------------
# writers

CURVE_FIELDS = ("round", "learner_label", "mean_wealth", "std_wealth")


def curve_rows(study: Mapping[str, TrialSummary]) -> list[dict]:
    rows = []
    for label, s in study.items():
        for t, (m, sd) in enumerate(zip(s.mean, s.std), start=1):
            rows.append({"round": t, "learner_label": label, "mean_wealth": float(m), "std_wealth": float(sd)})
    return rows


def single_curve_rows(label: str, curve: WealthCurve) -> list[dict]:
    rows = []
    for t, w in enumerate(curve.wealth, start=1):
        row = {"round": t, "learner_label": label, "mean_wealth": float(w), "std_wealth": 0.0}
        if curve.investment is not None:
            row["cumulative_investment"] = float(curve.investment[t - 1])
        rows.append(row)
    return rows


def dump_curves(fh, rows: list[dict], fmt: str = "csv", meta: dict | None = None) -> None:
    """Write wealth-curve rows to an open text handle."""
    if fmt == "json":
        json.dump({"rng": RNG_ALGORITHM, **(meta or {}), "rows": rows}, fh, indent=2, sort_keys=True)
        fh.write("\n")
        return
    fields = list(CURVE_FIELDS) + (["cumulative_investment"] if rows and "cumulative_investment" in rows[0] else [])
    w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def write_curves(path, rows: list[dict], fmt: str = "csv", meta: dict | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        dump_curves(fh, rows, fmt, meta)
