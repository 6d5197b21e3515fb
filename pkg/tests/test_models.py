import datetime as dt

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from core.exceptions import (
    ConfigError,
    DataError,
    InsufficientHistoryError,
    NumericalError,
    PmgError,
    SingularDesignError,
)
from core.models import (
    ArmaGarchSpec,
    BacktestConfig,
    BarSeries,
    Frequency,
    IndicatorSeries,
    OhlcBar,
    VarFit,
)


def _frame(rows, start="1950-01", freq="M"):
    index = pd.period_range(start=start, periods=len(rows), freq=freq, name="date")
    return pd.DataFrame(rows, columns=["open", "high", "low", "close"], index=index, dtype=float)


class TestOhlcBar:
    def test_accepts_valid_bar(self):
        bar = OhlcBar(date=dt.date(1950, 1, 31), open=16.66, high=17.09, low=16.65, close=17.05)
        assert bar.high >= max(bar.open, bar.close)

    def test_rejects_high_below_close(self):
        with pytest.raises(ValidationError, match="high"):
            OhlcBar(date=dt.date(1950, 1, 31), open=10, high=10.5, low=9, close=11)

    def test_rejects_low_above_open(self):
        with pytest.raises(ValidationError, match="low"):
            OhlcBar(date=dt.date(1950, 1, 31), open=10, high=12, low=10.5, close=11)

    def test_rejects_non_positive_price(self):
        with pytest.raises(ValidationError):
            OhlcBar(date=dt.date(1950, 1, 31), open=0, high=1, low=0, close=1)


class TestBarSeries:
    def test_bars_round_through_records(self):
        series = BarSeries(Frequency.MONTHLY, _frame([[1, 2, 0.5, 1.5], [1.5, 1.6, 1.4, 1.45]]))
        rebuilt = BarSeries.from_bars(Frequency.MONTHLY, series.bars)
        pd.testing.assert_frame_equal(rebuilt.frame, series.frame)

    def test_duplicate_dates_rejected(self):
        frame = _frame([[1, 1, 1, 1], [1, 1, 1, 1]])
        frame.index = pd.PeriodIndex(["1950-01", "1950-01"], freq="M", name="date")
        with pytest.raises(DataError, match="duplicate"):
            BarSeries(Frequency.MONTHLY, frame)

    def test_frequency_must_match_index(self):
        with pytest.raises(DataError, match="does not match"):
            BarSeries(Frequency.QUARTERLY, _frame([[1, 1, 1, 1]]))

    def test_invariant_violation_names_period(self):
        with pytest.raises(DataError, match="1950-02"):
            BarSeries(Frequency.MONTHLY, _frame([[1, 1, 1, 1], [1, 1.1, 0.9, 1.2]]))


class TestArmaGarchSpec:
    def test_parameter_counts(self):
        assert ArmaGarchSpec(l=1, m=1).n_params == 6
        assert ArmaGarchSpec(l=2, m=2, p=0, q=0).n_params == 6
        assert ArmaGarchSpec(l=0, m=0, p=0, q=0).n_params == 2

    def test_labels(self):
        assert ArmaGarchSpec(l=1, m=2).label == "ARMA(1,2)-GARCH(1,1)"
        assert ArmaGarchSpec(l=1, m=1, p=0, q=0).label == "ARMA(1,1)"

    def test_mixed_garch_orders_rejected(self):
        with pytest.raises(ValidationError):
            ArmaGarchSpec(l=1, m=1, p=1, q=0)

    def test_orders_bounded(self):
        with pytest.raises(ValidationError):
            ArmaGarchSpec(l=3, m=1)


def test_indicator_series_checks_ranges():
    index = pd.period_range("2000-01", periods=3, freq="M")
    with pytest.raises(DataError):
        IndicatorSeries(name="I_MA", values=pd.Series([0.0, 0.5, 1.0], index=index))
    with pytest.raises(DataError):
        IndicatorSeries(name="H52", values=pd.Series([0.9, 1.1, np.nan], index=index))
    ok = IndicatorSeries(name="Hmax", values=pd.Series([0.9, 1.0, np.nan], index=index))
    assert ok.missing == 1


def test_var_fit_shape_checked():
    coefs = pd.DataFrame(np.zeros((2, 3)), index=["pmg", "pml"], columns=VarFit.coefficient_names(1))
    VarFit(q=1, coefs=coefs, data=pd.DataFrame(), first_target=1)
    with pytest.raises(DataError):
        VarFit(q=2, coefs=coefs, data=pd.DataFrame(), first_target=2)
    assert VarFit.coefficient_names(2) == ("const", "L1.pmg", "L1.pml", "L2.pmg", "L2.pml")


def test_backtest_config_for_frequency():
    monthly = BacktestConfig.for_frequency(Frequency.MONTHLY)
    quarterly = BacktestConfig.for_frequency(Frequency.QUARTERLY, gamma=5)
    assert (monthly.variance_window, monthly.annualization) == (120, 1200.0)
    assert (quarterly.variance_window, quarterly.annualization, quarterly.gamma) == (40, 400.0, 5)
    with pytest.raises(ValidationError):
        BacktestConfig(weight_lower=1.0, weight_upper=0.5)


class TestExceptions:
    def test_exit_codes(self):
        assert DataError("x").exit_code == 1
        assert InsufficientHistoryError("x").exit_code == 1
        assert NumericalError("x").exit_code == 2
        assert SingularDesignError("x", 1e17).exit_code == 2
        assert ConfigError("x").exit_code == 3

    def test_location_and_stage(self):
        error = DataError("cannot parse price", row=4, column="close")
        assert (error.row, error.column) == (4, "close")
        assert str(error.with_stage("decompose")) == "[decompose] cannot parse price (row 4, column 'close')"

    def test_stage_is_set_once(self):
        error = PmgError("boom").with_stage("fit").with_stage("all")
        assert error.stage == "fit"
