"""Granger causality, impact and control regressions, technical indicators."""

import logging
from itertools import permutations
from typing import Dict, Iterable, List, Mapping, Sequence, Union

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy import stats
from statsmodels.tsa.tsatools import lagmat

from core.config import settings
from core.exceptions import DataError, InsufficientHistoryError, SingularDesignError
from core.models import (
    BarSeries,
    ControlSeries,
    GrangerResult,
    IndicatorSeries,
    OlsResult,
)
from services.market_data import last_in_period

logger = logging.getLogger(__name__)

ArrayLike = Union[pd.Series, np.ndarray, Sequence[float]]


def _ols(y: np.ndarray, regressors: pd.DataFrame, dropped_rows: int = 0, dropped: Sequence[str] = ()):
    """Homoskedastic OLS with an intercept named ``const``."""
    design = sm.add_constant(regressors, has_constant="add", prepend=True)
    matrix = design.to_numpy(dtype=float)
    condition = float(np.linalg.cond(matrix))
    if np.linalg.matrix_rank(matrix) < matrix.shape[1]:
        raise SingularDesignError(f"design with columns {list(design.columns)} is rank deficient", condition)
    result = sm.OLS(np.asarray(y, dtype=float), matrix).fit()
    names = tuple(str(c) for c in design.columns)
    model = OlsResult(
        names=names,
        params=dict(zip(names, map(float, result.params))),
        tvalues=dict(zip(names, map(float, result.tvalues))),
        pvalues=dict(zip(names, map(float, result.pvalues))),
        r_squared=float(result.rsquared),
        n_obs=int(result.nobs),
        condition_number=condition,
        dropped_rows=dropped_rows,
        dropped_regressors=tuple(dropped),
    )
    return model, result


def _ssr(y: np.ndarray, x: np.ndarray) -> float:
    design = np.column_stack([np.ones(len(y)), x])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise SingularDesignError("Granger design is rank deficient", float(np.linalg.cond(design)))
    return float(sm.OLS(y, design).fit().ssr)


def granger_test(
    x: ArrayLike,
    y: ArrayLike,
    lag: int,
    cause: str = "x",
    effect: str = "y",
) -> GrangerResult:
    """F test that ``lag`` lags of x add to ``lag`` lags of y in predicting y.

    Both regressions run on the same T = n - lag observations.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise DataError(f"Granger series lengths differ ({len(x)} vs {len(y)})")
    if lag < 1:
        raise DataError("Granger lag must be positive")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError("Granger series contain missing values")
    if len(y) <= 2 * lag + 1:
        raise InsufficientHistoryError(f"Granger test at lag {lag} needs more than {2 * lag + 1} observations")

    target = y[lag:]
    own = lagmat(y, maxlag=lag, trim="both")
    other = lagmat(x, maxlag=lag, trim="both")
    t = len(target)
    df_den = t - 2 * lag - 1
    if df_den < 1:
        raise InsufficientHistoryError(f"Granger test at lag {lag} leaves no residual degrees of freedom")

    ssr_u = _ssr(target, np.column_stack([own, other]))
    ssr_r = _ssr(target, own)
    if ssr_u <= 0:
        raise SingularDesignError("unrestricted Granger regression fits exactly", float("inf"))
    f_stat = max(((ssr_r - ssr_u) / lag) / (ssr_u / df_den), 0.0)
    return GrangerResult(
        cause=cause,
        effect=effect,
        lag=lag,
        f_stat=f_stat,
        p_value=float(stats.f.sf(f_stat, lag, df_den)),
        n_obs=t,
        df_num=lag,
        df_den=df_den,
    )


def granger_table(series: Mapping[str, ArrayLike], lags: Iterable[int]) -> pd.DataFrame:
    """Every ordered pair of ``series`` at every lag, one row per direction."""
    lags = sorted(set(lags))
    rows: Dict[str, Dict[str, float]] = {}
    for cause, effect in permutations(series, 2):
        row: Dict[str, float] = {}
        for lag in lags:
            result = granger_test(series[cause], series[effect], lag, cause=cause, effect=effect)
            row[f"F({lag})"] = result.f_stat
            row[f"p({lag})"] = result.p_value
        rows[f"{cause} → {effect}"] = row
    frame = pd.DataFrame.from_dict(rows, orient="index")
    frame.index.name = "direction"
    return frame


def impact_regression(chi: pd.Series, psi: pd.Series, lag: int = 1) -> OlsResult:
    """OLS of chi_t on a constant and psi_{t-lag}."""
    if len(chi) != len(psi):
        raise DataError("impact regression series lengths differ")
    if lag < 1 or lag >= len(chi) - 2:
        raise DataError(f"impact regression lag {lag} is out of range")
    name = str(getattr(psi, "name", None) or "psi")
    y = np.asarray(chi, dtype=float)[lag:]
    x = pd.DataFrame({name: np.asarray(psi, dtype=float)[:-lag]})
    model, _ = _ols(y, x)
    return model


def _aligned(values: pd.Series, index: pd.Index) -> pd.Series:
    if isinstance(values.index, pd.PeriodIndex) and isinstance(index, pd.PeriodIndex):
        if values.index.freqstr != index.freqstr:
            values = last_in_period(values, index)
    return values.reindex(index)


def _control_frame(
    index: pd.Index, controls: Sequence[ControlSeries], include_contemporaneous: bool
) -> tuple:
    columns: Dict[str, pd.Series] = {}
    dropped: List[str] = []
    for control in controls:
        values = _aligned(control.values.astype(float), index)
        if (values.fillna(0.0) == 0.0).all():
            logger.warning("⚠️ Control %s has no nonzero observations; dropped", control.name)
            dropped.append(control.name)
            continue
        columns[f"{control.name}_t"] = values
        if include_contemporaneous:
            columns[f"{control.name}_t+1"] = values.shift(-1)
    return pd.DataFrame(columns, index=index), dropped


def control_regression(
    pmg_f: pd.Series,
    pml_f: pd.Series,
    controls: Sequence[ControlSeries] = (),
    include_contemporaneous: bool = False,
) -> OlsResult:
    """PMG^F_{t+1} on a constant, PML^F_t and controls at t (and t+1 if requested).

    The sample is the maximal common window; rows lost to missing control
    values are counted in ``dropped_rows``.
    """
    if not pmg_f.index.equals(pml_f.index):
        raise DataError("filtered PMG and PML must share one calendar")
    index = pmg_f.index
    frame = pd.DataFrame({"target": pmg_f.shift(-1), "PML": pml_f}, index=index)
    extra, dropped = _control_frame(index, controls, include_contemporaneous)
    frame = frame.join(extra)
    available = len(frame) - 1
    frame = frame.dropna()
    lost = available - len(frame)
    if lost:
        logger.info("Control regression dropped %d rows with missing values", lost)
    if len(frame) <= frame.shape[1] + 1:
        raise InsufficientHistoryError("too few complete rows for the control regression")
    model, _ = _ols(frame["target"].to_numpy(), frame.drop(columns="target"), lost, dropped)
    return model


def indicator_return_regression(r: pd.Series, controls: Sequence[ControlSeries]) -> OlsResult:
    """r_{t+1} on a constant and each control at t."""
    if not controls:
        raise DataError("indicator return regression needs at least one control")
    frame = pd.DataFrame({"target": r.shift(-1)}, index=r.index)
    extra, dropped = _control_frame(r.index, controls, include_contemporaneous=False)
    frame = frame.join(extra)
    available = len(frame) - 1
    frame = frame.dropna()
    if extra.empty or len(frame) <= frame.shape[1] + 1:
        raise InsufficientHistoryError("too few complete rows for the indicator return regression")
    model, _ = _ols(frame["target"].to_numpy(), frame.drop(columns="target"), available - len(frame), dropped)
    return model


def state_dependent_controls(i_ma: IndicatorSeries, mri: IndicatorSeries) -> List[IndicatorSeries]:
    """Split MRI into good-state (I_MA = 1) and bad-state parts."""
    index = i_ma.values.index.union(mri.values.index)
    state = i_ma.values.reindex(index)
    level = mri.values.reindex(index)
    return [
        IndicatorSeries(name="I_MA·MRI", values=(state * level).rename("I_MA·MRI")),
        IndicatorSeries(name="(1-I_MA)·MRI", values=((1.0 - state) * level).rename("(1-I_MA)·MRI")),
    ]


# Technical indicators


def _rolling_moment_skew(returns: pd.Series, window: int) -> pd.Series:
    # pandas gives the adjusted Fisher-Pearson skew; rescale to the moment estimator
    adjusted = returns.rolling(window).skew()
    return adjusted * (window - 2) / np.sqrt(window * (window - 1))


def _month_end_closes(close: pd.Series) -> pd.Series:
    months = pd.period_range(close.index[0].asfreq("M"), close.index[-1].asfreq("M"), freq="M", name="date")
    return last_in_period(close, months)


def mean_reversion_indicator(close: pd.Series) -> pd.Series:
    """(r_{t-12 -> t} - u) / sigma on month-end closes.

    u is the trailing mean of the 12-month return over ``mri_mean_window``
    months (all available history while shorter); sigma is the standard
    deviation of the last ``mri_vol_window`` monthly log returns, annualized
    unless ``mri_annualize`` is off.
    """
    monthly = np.log(_month_end_closes(close))
    annual = monthly - monthly.shift(12)
    long_mean = annual.rolling(settings.mri_mean_window, min_periods=1).mean()
    vol = monthly.diff().rolling(settings.mri_vol_window).std()
    if settings.mri_annualize:
        vol = vol * np.sqrt(12.0)
    mri = ((annual - long_mean) / vol.where(vol > 0)).rename("MRI")
    short = annual.notna().cumsum() < settings.mri_mean_window
    mri.attrs["short_history"] = mri.index[short & mri.notna()]
    return mri


def build_indicators(daily: BarSeries, calendar: pd.PeriodIndex) -> List[IndicatorSeries]:
    """MRI, I_MA, H52, Hmax and SK from daily closes, sampled at calendar period-ends."""
    if len(daily) < 2:
        raise InsufficientHistoryError("indicators need a daily price history")
    close = daily.column("close").astype(float)
    log_returns = np.log(close).diff()
    moving_average = close.rolling(settings.ma_window).mean()

    raw = {
        "MRI": mean_reversion_indicator(close),
        "I_MA": (close > moving_average).astype(float).where(moving_average.notna()),
        "H52": close / close.rolling(settings.h52_window).max(),
        "Hmax": close / close.cummax(),
        "SK": _rolling_moment_skew(log_returns, settings.skew_window),
    }

    indicators = []
    for name, values in raw.items():
        sampled = last_in_period(values, calendar).rename(name)
        valid = sampled.dropna()
        if valid.empty:
            raise InsufficientHistoryError(f"daily history too short to compute {name} on the calendar")
        notes = []
        start = valid.index[0]
        if start > calendar[0]:
            logger.warning("⚠️ %s starts at %s, after the calendar start %s", name, start, calendar[0])
            notes.append(f"starts {start}")
        if name == "MRI":
            short = values.attrs.get("short_history", pd.PeriodIndex([], freq="M"))
            sampled_short = valid.index[valid.index.isin(short.asfreq(calendar.freqstr))]
            if len(sampled_short):
                notes.append(f"long-term mean uses short history through {sampled_short[-1]}")
        indicators.append(IndicatorSeries(name=name, values=sampled, start=start, notes=tuple(notes)))
    return indicators


def indicator_frame(indicators: Iterable[IndicatorSeries]) -> pd.DataFrame:
    return pd.DataFrame({i.name: i.values for i in indicators})
