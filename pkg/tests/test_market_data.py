import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings

from core.exceptions import DataError
from core.models import BarSeries, Frequency
from services import market_data
from tests.strategies import bar_series


class TestParsePeriod:
    def test_layouts(self):
        assert market_data.parse_period("1950-01", Frequency.MONTHLY) == pd.Period("1950-01", freq="M")
        assert market_data.parse_period("195001", Frequency.MONTHLY) == pd.Period("1950-01", freq="M")
        assert market_data.parse_period("1950-01-31", Frequency.MONTHLY) == pd.Period("1950-01", freq="M")
        assert market_data.parse_period("1971-Q1", Frequency.QUARTERLY) == pd.Period("1971Q1", freq="Q")
        assert market_data.parse_period("19713", Frequency.QUARTERLY) == pd.Period("1971Q3", freq="Q")

    def test_quarter_label_in_monthly_file(self):
        with pytest.raises(ValueError):
            market_data.parse_period("1971Q1", Frequency.MONTHLY)

    @pytest.mark.parametrize("cell", ["", "  ", "nan", float("nan")])
    def test_empty_cell(self, cell):
        with pytest.raises(ValueError):
            market_data.parse_period(cell, Frequency.MONTHLY)

    def test_daily_needs_full_date(self):
        with pytest.raises(ValueError):
            market_data.parse_period("1950-01", Frequency.DAILY)


class TestLoadBars:
    def test_valid_file(self, data_dir):
        series = market_data.load_bars(data_dir / "two_bars.csv", Frequency.MONTHLY)
        assert len(series) == 2
        assert series.frame.loc[pd.Period("1950-02", freq="M"), "high"] == 110.0

    def test_invariant_violation_reports_row(self, data_dir):
        with pytest.raises(DataError, match="row 3") as excinfo:
            market_data.load_bars(data_dir / "bad_ohlc.csv", Frequency.MONTHLY)
        assert excinfo.value.row == 3

    def test_non_monotone_dates(self, data_dir):
        with pytest.raises(DataError, match="strictly increasing") as excinfo:
            market_data.load_bars(data_dir / "non_monotone.csv", Frequency.MONTHLY)
        assert (excinfo.value.row, excinfo.value.column) == (4, "date")

    def test_parse_failure_reports_column(self, data_dir):
        with pytest.raises(DataError) as excinfo:
            market_data.load_bars(data_dir / "bad_price.csv", Frequency.MONTHLY)
        assert (excinfo.value.row, excinfo.value.column) == (3, "close")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="does not exist"):
            market_data.load_bars(tmp_path / "absent.csv", Frequency.MONTHLY)

    def test_blank_date_reports_row(self, tmp_path):
        path = tmp_path / "blank_date.csv"
        path.write_text("date,open,high,low,close\n1950-01,10,11,9,10.5\n,10.5,11,10,10.8\n")
        with pytest.raises(DataError, match="cannot parse date") as excinfo:
            market_data.load_bars(path, Frequency.MONTHLY)
        assert (excinfo.value.row, excinfo.value.column) == (3, "date")

    def test_invalid_utf8_reports_row_and_column(self, tmp_path):
        path = tmp_path / "latin1.csv"
        path.write_bytes(b"date,open,high,low,close\n1950-01,10,11,9,10.5\n1950-02,10.5,11,10,1\xe90.8\n")
        with pytest.raises(DataError, match="UTF-8") as excinfo:
            market_data.load_bars(path, Frequency.MONTHLY)
        assert (excinfo.value.row, excinfo.value.column) == (3, "close")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DataError, match="empty"):
            market_data.load_bars(path, Frequency.MONTHLY)

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("date,open,high,low,close\n1950-01,10,11,9,10.5\n1950-02,10.5,11,10,10.8,3,4\n")
        with pytest.raises(DataError, match="well-formed") as excinfo:
            market_data.load_bars(path, Frequency.MONTHLY)
        assert excinfo.value.row == 3

    def test_rows_are_file_lines(self, tmp_path):
        path = tmp_path / "commented.csv"
        path.write_text(
            "# source: vendor\n# generated: nightly\ndate,open,high,low,close\n"
            "1950-01,10,11,9,10.5\n\n1950-02,10.5,10,10.2,10.8\n"
        )
        with pytest.raises(DataError, match="OHLC") as excinfo:
            market_data.load_bars(path, Frequency.MONTHLY)
        assert excinfo.value.row == 6

    def test_full_history_length(self, monthly_bars, bars_csv):
        reloaded = market_data.load_bars(bars_csv, Frequency.MONTHLY)
        assert len(reloaded) == 792
        assert str(reloaded.dates[0]) == "1950-01"
        assert str(reloaded.dates[-1]) == "2015-12"

    def test_written_series_reloads_identically(self, monthly_bars, bars_csv):
        reloaded = market_data.load_bars(bars_csv, Frequency.MONTHLY)
        pd.testing.assert_frame_equal(reloaded.frame, monthly_bars.frame, check_exact=True)


class TestToQuarterly:
    def test_aggregates_extremes(self, data_dir):
        monthly = market_data.load_bars(data_dir / "monthly_small.csv", Frequency.MONTHLY)
        quarterly = market_data.to_quarterly(monthly)
        first = quarterly.frame.iloc[0]
        assert (first["open"], first["high"], first["low"], first["close"]) == (9.5, 12.0, 8.0, 10.0)

    def test_trailing_partial_quarter_dropped(self, data_dir):
        monthly = market_data.load_bars(data_dir / "monthly_small.csv", Frequency.MONTHLY)
        quarterly = market_data.to_quarterly(monthly)
        assert list(map(str, quarterly.dates)) == ["1950Q1", "1950Q2"]

    def test_flat_quarter(self):
        index = pd.period_range("2000-01", periods=3, freq="M", name="date")
        frame = pd.DataFrame(100.0, index=index, columns=["open", "high", "low", "close"])
        quarterly = market_data.to_quarterly(BarSeries(Frequency.MONTHLY, frame))
        assert quarterly.frame.iloc[0].tolist() == [100.0, 100.0, 100.0, 100.0]

    def test_full_history(self, monthly_bars):
        assert len(market_data.to_quarterly(monthly_bars)) == 264

    def test_must_start_on_quarter(self, monthly_bars):
        shifted = BarSeries(Frequency.MONTHLY, monthly_bars.frame.iloc[1:])
        with pytest.raises(DataError, match="quarter"):
            market_data.to_quarterly(shifted)

    @settings(max_examples=50, deadline=None)
    @given(bar_series(min_size=3, max_size=36))
    def test_quarterly_extremes_bound_monthly(self, monthly):
        quarterly = market_data.to_quarterly(monthly)
        quarters = monthly.dates.asfreq("Q")
        for period, row in quarterly.frame.iterrows():
            months = monthly.frame[quarters == period]
            assert len(months) == 3
            assert row["high"] >= months["high"].max()
            assert row["low"] <= months["low"].min()
            assert row["high"] >= max(row["open"], row["close"])
            assert row["low"] <= min(row["open"], row["close"])


class TestLoadPredictors:
    @pytest.fixture
    def calendar(self, data_dir):
        return market_data.load_bars(data_dir / "monthly_small.csv", Frequency.MONTHLY)

    def test_aligned_series(self, data_dir, calendar):
        predictors = market_data.load_predictors(data_dir / "predictors.csv", calendar)
        assert [p.name for p in predictors] == ["BM", "TBL"]
        assert all(len(p.values) == len(calendar) for p in predictors)
        assert all(p.values.index.equals(calendar.dates) for p in predictors)

    def test_gap_is_explicit_missing(self, data_dir, calendar):
        bm = market_data.predictor_by_name(market_data.load_predictors(data_dir / "predictors.csv", calendar), "bm")
        assert bm.missing == 1
        assert np.isnan(bm.values[pd.Period("1950-03", freq="M")])

    def test_no_overlap(self, data_dir, calendar):
        with pytest.raises(DataError, match="shares no dates"):
            market_data.load_predictors(data_dir / "predictors_no_overlap.csv", calendar)

    def test_duplicate_columns(self, data_dir, calendar):
        with pytest.raises(DataError, match="duplicate"):
            market_data.load_predictors(data_dir / "predictors_duplicate.csv", calendar)

    def test_blank_date_rejected(self, tmp_path, calendar):
        path = tmp_path / "predictors_blank_date.csv"
        path.write_text("date,BM,TBL\n195001,0.70,0.0107\n,0.69,0.0112\n")
        with pytest.raises(DataError, match="cannot parse date") as excinfo:
            market_data.load_predictors(path, calendar)
        assert (excinfo.value.row, excinfo.value.column) == (3, "date")

    def test_unknown_name(self, data_dir, calendar):
        predictors = market_data.load_predictors(data_dir / "predictors.csv", calendar)
        with pytest.raises(DataError, match="not found"):
            market_data.predictor_by_name(predictors, "DFY")


def test_last_in_period_keeps_calendar():
    days = pd.period_range("2000-01-03", periods=45, freq="D")
    values = pd.Series(np.arange(45, dtype=float), index=days, name="close")
    months = pd.period_range("1999-12", "2000-02", freq="M")
    sampled = market_data.last_in_period(values, months)
    assert np.isnan(sampled.iloc[0])
    assert sampled.iloc[1] == 28.0  # 2000-01-31
    assert sampled.iloc[2] == 44.0
