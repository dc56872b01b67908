import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaswitch import portfolio as pf
from adaswitch.harness import EpisodeLedger, theoretical_bound
from adaswitch.portfolio import (
    MARKET_MODELS,
    AssetSpec,
    MarketModelSpec,
    PriceFormatError,
    PriceSeries,
    backtest,
    backtest_prices,
    gen_synthetic_market,
    load_price_csv,
    price_to_gradients,
    trial_study,
)
from adaswitch.vector import CoordinateBaseline, CoordinateOLO

FIXTURE = Path(__file__).parent / "data" / "prices_8sym.csv"


# ---------------------------------------------------------------------------
# synthetic markets


def test_market_deterministic_parts():
    g = gen_synthetic_market(1, 1000, seed=0, noise=False)
    assert g.shape == (1000, 5)
    assert g[249, 0] == pytest.approx(0.6, abs=1e-15)
    np.testing.assert_allclose(g[:, 4], 0.2, rtol=0, atol=0)


@pytest.mark.parametrize("model", [1, 2, 3])
def test_market_bounded_and_deterministic(model):
    g = gen_synthetic_market(model, 10**4, seed=42)
    assert np.all(np.abs(g) <= 1.0)
    assert g.tobytes() == gen_synthetic_market(model, 10**4, seed=42).tobytes()
    assert g.tobytes() != gen_synthetic_market(model, 10**4, seed=43).tobytes()


def test_market_models_listed():
    assert sorted(MARKET_MODELS) == [1, 2, 3]
    assert all(m.d == 5 and m.period == 1000 for m in MARKET_MODELS.values())
    assert gen_synthetic_market(2, 0, seed=1).shape == (0, 5)
    with pytest.raises(ValueError):
        gen_synthetic_market(1, -1, seed=1)


def test_market_spec_rejects_unbounded_asset():
    with pytest.raises(ValueError):
        MarketModelSpec((AssetSpec(0.6, 0.3, 0.0, 0.2),))


# ---------------------------------------------------------------------------
# price data


def write(tmp_path, text):
    p = tmp_path / "p.csv"
    p.write_text(text, encoding="utf-8")
    return p


def test_two_row_gradient(tmp_path):
    ps = load_price_csv(write(tmp_path, "date,A\n2020-01-01,10.0\n2020-01-02,11.5\n"))
    g, G = price_to_gradients(ps)
    assert g.tolist() == [[1.5]] and G == 1.5


def test_constant_prices(tmp_path):
    ps = load_price_csv(write(tmp_path, "date,A,B\n2020-01-01,3,4\n2020-01-02,3,4\n2020-01-03,3,4\n"))
    g, G = price_to_gradients(ps)
    assert not g.any() and G == 0.0


def test_fixture_shape():
    ps = load_price_csv(FIXTURE)
    g, G = price_to_gradients(ps)
    assert g.shape == (4, 8) and len(ps.symbols) == 8
    assert G == pytest.approx(np.max(np.abs(np.diff(ps.closes, axis=0))))


@pytest.mark.parametrize("body,line,msg", [
    ("date,A\n2020-01-01,1\n2020-01-01,2\n", 3, "not after"),
    ("date,A\n2020-01-02,1\n2020-01-01,2\n", 3, "not after"),
    ("date,A\n2020-01-01,1\n2020-01-02,-2\n", 3, "positive"),
    ("date,A\n2020-01-01,1\n2020-13-02,2\n", 3, "bad date"),
    ("date,A,B\n2020-01-01,1\n", 2, "fields"),
    ("date,A\n2020-01-01,x\n", 2, "non-numeric"),
    ("date,A\n2020-01-01,nan\n", 2, "non-finite"),
    ("day,A\n2020-01-01,1\n", 1, "header"),
])
def test_loader_errors_cite_line(tmp_path, body, line, msg):
    with pytest.raises(PriceFormatError, match=rf":{line}: .*{msg}"):
        load_price_csv(write(tmp_path, body))


def test_price_series_validation():
    import datetime as dt
    with pytest.raises(PriceFormatError):
        PriceSeries([dt.date(2020, 1, 1)], [[1.0, 2.0]], ["A"])


# ---------------------------------------------------------------------------
# backtests


class Scripted:
    """Learner that replays fixed holdings."""

    def __init__(self, xs, G=1.0):
        self.xs = np.asarray(xs, dtype=float)
        self.d = self.xs.shape[1]
        self.G, self.lam, self.t = G, 0.0, 0

    def predict(self):
        x = self.xs[self.t]
        self.t += 1
        return x

    def observe(self, g):
        pass


def test_zero_learner_wealth():
    g = gen_synthetic_market(1, 50, seed=0)
    curve = backtest(Scripted(np.zeros((50, 5))), g, 0.1)
    assert not curve.wealth.any() and curve.final_wealth == 0.0


def test_jump_example():
    g = np.array([[0.5], [0.5]])
    charged = backtest(Scripted([[1.0], [1.0]]), g, 0.1, initial_holdings=[0.0])
    assert charged.final_wealth == pytest.approx(0.9, abs=1e-15)
    # default opening x_0 = x_1: the first purchase is free
    assert backtest(Scripted([[1.0], [1.0]]), g, 0.1).final_wealth == pytest.approx(1.0, abs=1e-15)


def test_backtest_dimension_mismatch():
    with pytest.raises(ValueError):
        backtest(CoordinateOLO(3), np.zeros((4, 5)), 0.1)
    with pytest.raises(ValueError):
        backtest(CoordinateOLO(3), np.zeros(4), 0.1)


@settings(max_examples=25)
@given(st.integers(1, 200), st.integers(0, 10**6), st.sampled_from([0.0, 0.1, 1.0]))
def test_wealth_identity(T, seed, lam):
    g = gen_synthetic_market(1, T, seed)
    curve = backtest(CoordinateOLO(5, lam=lam), g, lam)
    x = curve.holdings
    inc = np.einsum("ti,ti->t", g, x)
    inc[1:] -= lam * np.abs(np.diff(x, axis=0)).sum(axis=1)
    np.testing.assert_allclose(np.diff(np.concatenate([[0.0], curve.wealth])), inc, rtol=1e-12, atol=1e-12)
    ledger = EpisodeLedger(x, -g, lam, 1.0)
    np.testing.assert_array_equal(curve.wealth, -ledger.prefix_regrets(np.zeros(5)))


def test_wealth_beats_buy_and_hold_minus_bound():
    g = gen_synthetic_market(1, 2000, seed=3)
    params = dict(C=1.0, G=1.0, lam=0.1)
    curve = backtest(CoordinateOLO(5, **params), g, 0.1)
    for u in (np.zeros(5), np.eye(5)[0], np.eye(5)[4], np.full(5, 2.0), -np.ones(5)):
        floor = float(g.sum(axis=0) @ u) - float(theoretical_bound("coordinate", params, u, 2000))
        assert curve.final_wealth >= floor


def test_investment_tracking():
    ps = load_price_csv(FIXTURE)
    curve = backtest_prices(CoordinateOLO(8, C=1.0, G=25.0, lam=0.1), ps, 0.1)
    assert curve.meta["symbols"] == ps.symbols
    x = np.vstack([np.zeros(8), curve.holdings])
    dx = np.diff(x, axis=0)
    expected = np.cumsum((ps.closes[:-1] * dx).sum(axis=1) + 0.1 * np.abs(dx).sum(axis=1))
    np.testing.assert_allclose(curve.investment, expected, rtol=1e-13)


def test_batch_matches_single_backtests():
    markets = np.stack([gen_synthetic_market(2, 300, s) for s in range(4)], axis=2)
    batch = pf.batch_wealth(CoordinateOLO(5, lam=0.1), markets, 0.1)
    for k in range(4):
        single = backtest(CoordinateOLO(5, lam=0.1), markets[:, :, k], 0.1).wealth
        np.testing.assert_allclose(batch[:, k], single, rtol=1e-12, atol=1e-12)


# ---------------------------------------------------------------------------
# trial studies


def test_single_trial_has_zero_std():
    study = trial_study(1, 1, 100, {"ours": lambda: CoordinateOLO(5)}, base_seed=0, lam=0.1)
    assert not study["ours"].std.any()
    with pytest.raises(ValueError):
        trial_study(1, 0, 100, {"ours": lambda: CoordinateOLO(5)}, base_seed=0, lam=0.1)


def test_trials_are_paired():
    seen = []

    class Recorder(Scripted):
        def observe(self, g):
            seen.append(np.array(g))

    factories = {"a": lambda: Recorder(np.zeros((30, 5))), "b": lambda: Recorder(np.zeros((30, 5)))}
    trial_study(3, 2, 30, factories, base_seed=5, lam=0.1)
    # four runs (2 learners x 2 trials) of 30 rounds; learner b repeats learner a's markets
    runs = np.array(seen).reshape(2, 2, 30, 5)
    np.testing.assert_array_equal(runs[0], runs[1])
    np.testing.assert_array_equal(-runs[0, 1], gen_synthetic_market(3, 30, 6))


def test_study_model_one():
    makers = {"ours": lambda: CoordinateOLO(5, 1.0, 1.0, 0.1), "baseline": lambda: CoordinateBaseline(5, 1.0, 1.0, 0.1)}
    study = trial_study(1, 50, 2000, makers, base_seed=0, lam=0.1)
    assert study["ours"].mean[-1] > study["baseline"].mean[-1]
    assert study["ours"].finals.shape == (50,)


# ---------------------------------------------------------------------------
# writers


def test_curve_writers(tmp_path):
    import csv
    import json
    study = trial_study(1, 2, 5, {"ours": lambda: CoordinateOLO(5)}, base_seed=0, lam=0.1)
    rows = pf.curve_rows(study)
    pf.write_curves(tmp_path / "c.csv", rows)
    got = list(csv.DictReader(open(tmp_path / "c.csv")))
    assert list(got[0]) == list(pf.CURVE_FIELDS) and len(got) == 5
    assert float(got[-1]["mean_wealth"]) == study["ours"].mean[-1]
    pf.write_curves(tmp_path / "c.json", rows, "json", meta={"model": 1})
    doc = json.loads((tmp_path / "c.json").read_text())
    assert doc["rng"] == "numpy.random.PCG64" and doc["model"] == 1 and len(doc["rows"]) == 5
    curve = backtest_prices(CoordinateOLO(8, G=25.0), load_price_csv(FIXTURE), 0.1)
    assert "cumulative_investment" in pf.single_curve_rows("ours", curve)[0]
