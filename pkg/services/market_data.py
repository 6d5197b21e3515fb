"""Loading, validating and re-sampling OHLC bar files and predictor files."""

import io
import logging
import re
from collections import Counter
from pathlib import Path
from typing import Iterable, List, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from core.exceptions import DataError
from core.models import PRICE_COLUMNS, BarSeries, Frequency, OhlcBar, PredictorSeries

logger = logging.getLogger(__name__)

BAR_HEADER = ("date",) + PRICE_COLUMNS

_QUARTER = re.compile(r"^(\d{4})-?Q([1-4])$", re.IGNORECASE)
_YYYYMM = re.compile(r"^(\d{4})(\d{2})$")
_YYYYQ = re.compile(r"^(\d{4})([1-4])$")


def parse_period(text: str, frequency: Frequency) -> pd.Period:
    """Parse a date cell into a period of the given frequency.

    Accepts ISO dates (YYYY-MM-DD), months (YYYY-MM), quarters (YYYY-Qn)
    and the compact yyyymm / yyyyq layouts of predictor files.
    """
    text = str(text).strip()
    if not text or text.lower() in ("nan", "nat", "none"):
        raise ValueError("empty date cell")
    code = frequency.period_code
    match = _QUARTER.match(text)
    if match:
        if frequency is not Frequency.QUARTERLY:
            raise ValueError(f"quarter label '{text}' in a {frequency.value} file")
        return pd.Period(year=int(match.group(1)), quarter=int(match.group(2)), freq="Q")
    match = _YYYYMM.match(text)
    if match:
        return pd.Period(year=int(match.group(1)), month=int(match.group(2)), freq="M").asfreq(code)
    match = _YYYYQ.match(text)
    if match and frequency is Frequency.QUARTERLY:
        return pd.Period(year=int(match.group(1)), quarter=int(match.group(2)), freq="Q")
    if frequency is Frequency.DAILY and len(text) < 10:
        raise ValueError(f"daily bars need full YYYY-MM-DD dates, got '{text}'")
    period = pd.Period(text, freq=code)
    if pd.isna(period):
        raise ValueError(f"'{text}' is not a date")
    return period


def _data_lines(path: Path) -> List[Tuple[int, str]]:
    """Decoded non-blank, non-comment lines with their 1-based line numbers."""
    try:
        data = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read '{path}': {e.strerror}")
    try:
        text = data.decode("utf-8").lstrip("\ufeff")
    except UnicodeDecodeError as e:
        line_start = data.rfind(b"\n", 0, e.start) + 1
        row = data.count(b"\n", 0, e.start) + 1
        position = data[line_start : e.start].count(b",")
        header = data.split(b"\n", 1)[0].decode("utf-8", errors="replace").split(",")
        column = header[position].strip() if row > 1 and position < len(header) else None
        raise DataError(f"'{path.name}' is not valid UTF-8 (byte 0x{data[e.start]:02x})", row=row, column=column)
    lines = [
        (number, line)
        for number, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not lines:
        raise DataError(f"'{path.name}' is empty", row=1)
    return lines


def _read_table(path: Path) -> Tuple[pd.DataFrame, List[int]]:
    """Parse a CSV file as strings; returns the frame and each data row's file line number."""
    lines = _data_lines(path)
    try:
        raw = pd.read_csv(io.StringIO("\n".join(line for _, line in lines)), dtype=str, skipinitialspace=True)
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        row = lines[int(match.group(1)) - 1][0] if match and int(match.group(1)) <= len(lines) else None
        raise DataError(f"'{path.name}' is not well-formed CSV", row=row)
    raw.columns = [str(c).strip() for c in raw.columns]
    return raw, [number for number, _ in lines[1:]]


def format_period(period: pd.Period, frequency: Frequency) -> str:
    if frequency is Frequency.QUARTERLY:
        return f"{period.year}-Q{period.quarter}"
    if frequency is Frequency.MONTHLY:
        return f"{period.year:04d}-{period.month:02d}"
    return period.strftime("%Y-%m-%d")


def load_bars(path: Union[str, Path], frequency: Frequency) -> BarSeries:
    """Read a ``date,open,high,low,close`` file into a validated series.

    ``#`` lines and blank lines are skipped; reported rows are file line
    numbers.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"bar file '{path}' does not exist")
    raw, row_numbers = _read_table(path)
    raw.columns = [c.lower() for c in raw.columns]
    missing = [c for c in BAR_HEADER if c not in raw.columns]
    if missing:
        raise DataError(f"bar file '{path.name}' lacks columns {missing}", row=1)

    periods, rows = [], []
    for row_number, record in zip(row_numbers, raw.loc[:, list(BAR_HEADER)].itertuples(index=False)):
        try:
            period = parse_period(record.date, frequency)
        except (ValueError, TypeError):
            raise DataError(f"cannot parse date '{record.date}'", row=row_number, column="date")
        values = {}
        for column in PRICE_COLUMNS:
            cell = getattr(record, column)
            try:
                values[column] = float(cell)
            except (ValueError, TypeError):
                raise DataError(f"cannot parse price '{cell}'", row=row_number, column=column)
            if not np.isfinite(values[column]):
                raise DataError("missing or non-finite price", row=row_number, column=column)
        try:
            OhlcBar(date=period.end_time.date(), **values)
        except ValidationError as e:
            err = e.errors()[0]
            column = str(err["loc"][0]) if err["loc"] else None
            raise DataError(f"OHLC invariant violated: {err['msg']}", row=row_number, column=column)
        if periods and period <= periods[-1]:
            raise DataError(
                f"dates must be strictly increasing ({period} follows {periods[-1]})",
                row=row_number,
                column="date",
            )
        periods.append(period)
        rows.append(values)

    frame = pd.DataFrame(rows, index=pd.PeriodIndex(periods, freq=frequency.period_code, name="date"))
    logger.info("Loaded %d %s bars from %s", len(frame), frequency.value, path.name)
    return BarSeries(frequency, frame.loc[:, list(PRICE_COLUMNS)].astype(float))


def write_bars(series: BarSeries, path: Union[str, Path], header: Iterable[str] = ()) -> Path:
    """Write the canonical format read back by :func:`load_bars`, ``header`` as ``#`` lines."""
    path = Path(path)
    out = series.frame.loc[:, list(PRICE_COLUMNS)].copy()
    out.index = [format_period(p, series.frequency) for p in out.index]
    out.index.name = "date"
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.writelines(f"# {line}\n" for line in header)
        out.to_csv(fh, float_format="%.17g")
    return path


def to_quarterly(monthly: BarSeries) -> BarSeries:
    """Aggregate monthly bars into quarters.

    Low is the minimum and high the maximum over the three months, open is
    the first month's open and close the last month's close. A trailing
    partial quarter is dropped.
    """
    if monthly.frequency is not Frequency.MONTHLY:
        raise DataError(f"to_quarterly expects monthly bars, got {monthly.frequency.value}")
    frame = monthly.frame
    if len(frame) == 0:
        raise DataError("cannot aggregate an empty series")
    if frame.index[0].month % 3 != 1:
        raise DataError(f"monthly series must start on a quarter's first month, starts {frame.index[0]}")

    quarters = frame.index.asfreq("Q")
    sizes = pd.Series(quarters).value_counts(sort=False)
    last = quarters[-1]
    if sizes[last] < 3:
        logger.warning("⚠️ Dropping trailing partial quarter %s (%d month(s))", last, sizes[last])
        keep = quarters != last
        frame, quarters = frame[keep], quarters[keep]
        sizes = sizes.drop(last)
    incomplete = sizes[sizes != 3]
    if len(incomplete):
        raise DataError(f"quarter {incomplete.index[0]} has {incomplete.iloc[0]} monthly bars, expected 3")

    grouped = frame.groupby(quarters, sort=True)
    out = pd.DataFrame(
        {
            "open": grouped["open"].first(),
            "high": grouped["high"].max(),
            "low": grouped["low"].min(),
            "close": grouped["close"].last(),
        }
    )
    out.index = pd.PeriodIndex(out.index, freq="Q", name="date")
    return BarSeries(Frequency.QUARTERLY, out)


def load_predictors(path: Union[str, Path], calendar: BarSeries) -> List[PredictorSeries]:
    """Read a wide predictor file (one column per variable) aligned to ``calendar``.

    Dates outside the calendar are dropped and counted; calendar periods
    absent from the file become explicit missing values.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"predictor file '{path}' does not exist")
    header_row, header_line = _data_lines(path)[0]
    header = [c.strip() for c in header_line.split(",")]
    duplicated = [name for name, count in Counter(header).items() if count > 1]
    if duplicated:
        raise DataError(f"duplicate predictor columns {duplicated}", row=header_row)
    if not header or header[0].lower() not in ("date", "yyyymm", "yyyyq"):
        raise DataError("first predictor column must be the date", row=header_row, column=header[0] if header else None)

    raw, row_numbers = _read_table(path)
    date_column = raw.columns[0]
    periods = []
    for row_number, cell in zip(row_numbers, raw[date_column]):
        try:
            periods.append(parse_period(cell, calendar.frequency))
        except (ValueError, TypeError):
            raise DataError(f"cannot parse date '{cell}'", row=row_number, column=date_column)
    index = pd.PeriodIndex(periods, freq=calendar.frequency.period_code, name="date")
    if index.has_duplicates:
        raise DataError("predictor file contains duplicate dates")

    values = raw.drop(columns=[date_column]).apply(lambda col: pd.to_numeric(col.str.replace(",", ""), errors="coerce"))
    values.index = index
    overlap = index.isin(calendar.dates)
    if not overlap.any():
        raise DataError(f"predictor file '{path.name}' shares no dates with the bar calendar")
    dropped = int((~overlap).sum())
    if dropped:
        logger.info("Dropped %d predictor rows outside the bar calendar", dropped)
    aligned = values[overlap].reindex(calendar.dates)

    series = []
    for name in aligned.columns:
        column = aligned[name].astype(float)
        column.name = name
        predictor = PredictorSeries(name=name, values=column)
        if predictor.missing:
            logger.info("Predictor %s has %d missing observations", name, predictor.missing)
        series.append(predictor)
    return series


def predictor_by_name(predictors: List[PredictorSeries], name: str) -> PredictorSeries:
    for predictor in predictors:
        if predictor.name.lower() == name.lower():
            return predictor
    raise DataError(f"predictor '{name}' not found; available: {[p.name for p in predictors]}")


def last_in_period(series: pd.Series, calendar: pd.PeriodIndex) -> pd.Series:
    """Value at the final observation of each calendar period (NaN kept)."""
    keys = series.index.asfreq(calendar.freq)
    frame = pd.DataFrame({"value": series.to_numpy(dtype=float), "period": keys})
    last = frame.drop_duplicates("period", keep="last").set_index("period")["value"]
    last.index = pd.PeriodIndex(last.index, freq=calendar.freq)
    return last.reindex(calendar).astype(float).rename(series.name)


def log_prices(series: BarSeries) -> pd.DataFrame:
    return np.log(series.frame.loc[:, list(PRICE_COLUMNS)])
