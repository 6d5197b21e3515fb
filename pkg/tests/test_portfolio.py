import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from core.exceptions import DataError, InsufficientHistoryError
from core.models import BacktestConfig, Frequency, PredictorSeries
from services import portfolio

MONTHS = pd.period_range("2000-01", periods=24, freq="M", name="date")
SMALL = BacktestConfig(variance_window=12, annualization=1200.0)


@pytest.fixture
def history(rng):
    return pd.Series(rng.normal(0.006, 0.04, size=24), index=MONTHS, name="r")


@pytest.fixture
def evaluation_frame(history, rng):
    tail = history.iloc[12:]
    return pd.DataFrame(
        {
            "r": tail,
            "r_mean": history.expanding().mean().shift(1).iloc[12:],
            "r_var_forecast": rng.normal(0.005, 0.02, size=12),
        },
        index=tail.index,
    )


@pytest.fixture
def rf():
    return pd.Series(0.002, index=MONTHS, name="rf")


class TestRollingVariance:
    def test_matches_sample_variance(self, history):
        variance = portfolio.rolling_variance(history, 12)
        assert len(variance) == 13
        for position in (11, 17, 23):
            window = history.to_numpy()[position - 11 : position + 1]
            assert variance[history.index[position]] == pytest.approx(np.var(window, ddof=1))

    def test_full_window(self, history):
        variance = portfolio.rolling_variance(history, len(history))
        assert len(variance) == 1
        assert variance.iloc[0] == pytest.approx(history.var(ddof=1))

    def test_window_checks(self, history):
        with pytest.raises(DataError):
            portfolio.rolling_variance(history, 1)
        with pytest.raises(InsufficientHistoryError):
            portfolio.rolling_variance(history, 25)

    def test_zero_variance_windows_flagged(self):
        returns = pd.Series([0.01] * 14 + [0.02, -0.01] * 5, index=MONTHS)
        variance = portfolio.rolling_variance(returns, 12)
        assert variance.attrs["degenerate"] == MONTHS[11:14].tolist()
        assert (variance.loc[MONTHS[14]:] > 0).all()


def test_risk_free_from_tbl():
    tbl = PredictorSeries("TBL", pd.Series([0.06, 0.12], index=MONTHS[:2]))
    rf = portfolio.risk_free_from_tbl(tbl, Frequency.MONTHLY)
    np.testing.assert_allclose(rf.to_numpy(), [0.005, 0.01])
    assert rf.name == "rf"
    quarterly = portfolio.risk_free_from_tbl(pd.Series([0.04]), Frequency.QUARTERLY)
    assert quarterly.iloc[0] == pytest.approx(0.01)


class TestUtility:
    def test_certainty_equivalent(self):
        returns = np.array([0.01, 0.03, -0.02, 0.02])
        expected = returns.mean() - 1.5 * np.var(returns, ddof=1)
        assert portfolio.certainty_equivalent(returns, 3.0) == pytest.approx(expected)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-0.2, 0.2), min_size=2, max_size=30),
        st.floats(0.5, 10.0),
    )
    def test_certainty_equivalent_linear_in_gamma(self, returns, gamma):
        values = np.asarray(returns)
        slope = portfolio.certainty_equivalent(values, gamma + 1.0) - portfolio.certainty_equivalent(values, gamma)
        assert slope == pytest.approx(-0.5 * np.var(values, ddof=1), abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-0.2, 0.2), min_size=2, max_size=30),
        st.floats(0.5, 10.0),
        st.floats(-0.05, 0.05),
    )
    def test_certainty_equivalent_shifts_with_returns(self, returns, gamma, delta):
        values = np.asarray(returns)
        shifted = portfolio.certainty_equivalent(values + delta, gamma)
        assert shifted == pytest.approx(portfolio.certainty_equivalent(values, gamma) + delta, abs=1e-10)

    def test_sharpe_ratio(self):
        excess = np.array([0.01, 0.02, 0.03])
        assert portfolio.sharpe_ratio(excess) == pytest.approx(0.02 / 0.01)
        assert np.isnan(portfolio.sharpe_ratio(np.full(5, 0.01)))


class TestRunBacktest:
    def test_hand_ledger(self, history, evaluation_frame, rf):
        report = portfolio.run_backtest(evaluation_frame, history, rf, SMALL)
        values = history.to_numpy()
        for k, period in enumerate(evaluation_frame.index):
            position = 12 + k
            variance = np.var(values[position - 12 : position], ddof=1)
            row = report.ledger.loc[period]
            for column, source in (("weight_bench", "r_mean"), ("weight_model", "r_var_forecast")):
                raw = (evaluation_frame.loc[period, source] - 0.002) / (3.0 * variance)
                assert row[column] == pytest.approx(min(max(raw, 0.0), 1.5))
            assert row["ret_model"] == pytest.approx(row["weight_model"] * (values[position] - 0.002) + 0.002)
        expected_gain = 1200.0 * (
            portfolio.certainty_equivalent(report.ledger["ret_model"], 3.0)
            - portfolio.certainty_equivalent(report.ledger["ret_bench"], 3.0)
        )
        assert report.cer_gain == pytest.approx(expected_gain)
        assert report.ledger.columns.tolist() == ["weight_bench", "weight_model", "ret_bench", "ret_model", "rf"]

    def test_identical_forecasts_have_no_gain(self, history, evaluation_frame, rf):
        same = evaluation_frame.assign(r_var_forecast=evaluation_frame["r_mean"])
        report = portfolio.run_backtest(same, history, rf, SMALL)
        ledger = report.ledger
        np.testing.assert_array_equal(ledger["weight_model"], ledger["weight_bench"])
        np.testing.assert_array_equal(ledger["ret_model"], ledger["ret_bench"])
        assert report.cer_gain == pytest.approx(0.0, abs=1e-12)
        # NaN when both investors sit at a bound for the whole window
        np.testing.assert_equal(report.sharpe_model, report.sharpe_bench)

    def test_buy_and_hold_sharpe(self, history, evaluation_frame, rf):
        report = portfolio.run_backtest(evaluation_frame, history, rf, SMALL)
        assert report.sharpe_buy_hold == pytest.approx(portfolio.sharpe_ratio(evaluation_frame["r"] - 0.002))

    def test_weights_respect_bounds(self, history, evaluation_frame, rf):
        aggressive = evaluation_frame.assign(r_var_forecast=np.tile([1.0, -1.0], 6))
        report = portfolio.run_backtest(aggressive, history, rf, SMALL)
        assert set(report.ledger["weight_model"]) == {0.0, 1.5}
        assert report.clamped_model == 12

    def test_zero_variance_goes_to_bound(self, rf):
        flat = pd.Series(0.01, index=MONTHS)
        frame = pd.DataFrame(
            {"r": flat.iloc[12:], "r_mean": 0.01, "r_var_forecast": np.tile([0.05, -0.05], 6)},
            index=MONTHS[12:],
        )
        report = portfolio.run_backtest(frame, flat, rf, SMALL)
        assert report.ledger["weight_bench"].eq(1.5).all()
        assert report.ledger["weight_model"].tolist() == [1.5, 0.0] * 6
        assert report.degenerate_windows == 12
        assert report.summary()["degenerate_windows"] == 12

    @pytest.mark.parametrize("factor", [1.0, 12.0, 400.0])
    def test_cer_gain_scales_with_annualization(self, history, evaluation_frame, rf, factor):
        base = portfolio.run_backtest(evaluation_frame, history, rf, SMALL)
        scaled = portfolio.run_backtest(
            evaluation_frame, history, rf, SMALL.model_copy(update={"annualization": 1200.0 * factor})
        )
        assert scaled.cer_gain == pytest.approx(factor * base.cer_gain, rel=1e-12, abs=1e-15)
        pd.testing.assert_frame_equal(scaled.ledger, base.ledger)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.5, 10.0))
    def test_cer_consistent_on_random_inputs(self, seed, gamma):
        generator = np.random.default_rng(seed)
        history = pd.Series(generator.normal(0.006, 0.04, size=24), index=MONTHS)
        frame = pd.DataFrame(
            {
                "r": history.iloc[12:],
                "r_mean": generator.normal(0.005, 0.01, size=12),
                "r_var_forecast": generator.normal(0.005, 0.03, size=12),
            },
            index=MONTHS[12:],
        )
        rf = pd.Series(generator.uniform(0.0, 0.004, size=24), index=MONTHS)
        cfg = BacktestConfig(variance_window=12, annualization=1200.0, gamma=gamma)
        report = portfolio.run_backtest(frame, history, rf, cfg)
        ledger = report.ledger
        weights = ledger[["weight_bench", "weight_model"]].to_numpy()
        assert ((weights >= 0.0) & (weights <= 1.5)).all()
        assert report.nu_bench == pytest.approx(portfolio.certainty_equivalent(ledger["ret_bench"], gamma))
        assert report.nu_model == pytest.approx(portfolio.certainty_equivalent(ledger["ret_model"], gamma))
        assert report.cer_gain == pytest.approx(1200.0 * (report.nu_model - report.nu_bench))

    def test_missing_risk_free(self, history, evaluation_frame, rf):
        with pytest.raises(DataError, match="risk-free"):
            portfolio.run_backtest(evaluation_frame, history, rf.iloc[:20], SMALL)

    def test_variance_window_must_fit(self, history, evaluation_frame, rf):
        with pytest.raises(InsufficientHistoryError):
            portfolio.run_backtest(evaluation_frame, history, rf, BacktestConfig(variance_window=13))

    def test_forecast_columns_required(self, history, evaluation_frame, rf):
        with pytest.raises(DataError):
            portfolio.run_backtest(evaluation_frame.drop(columns="r_mean"), history, rf, SMALL)


class TestBacktestConfig:
    def test_frequency_defaults(self):
        quarterly = BacktestConfig.for_frequency(Frequency.QUARTERLY, gamma=5.0)
        assert (quarterly.variance_window, quarterly.annualization, quarterly.gamma) == (40, 400.0, 5.0)

    def test_bounds_ordered(self):
        with pytest.raises(ValidationError):
            BacktestConfig(weight_lower=1.0, weight_upper=0.5)
