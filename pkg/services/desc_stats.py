"""Summary statistics, correlations and standardization."""

import logging
from typing import Dict, Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats
from statsmodels.stats.diagnostic import acorr_ljungbox
from statsmodels.stats.stattools import jarque_bera
from statsmodels.tsa.stattools import acf

from core.config import settings
from core.exceptions import DataError, InsufficientHistoryError, NumericalError
from core.models import CorrelationMatrix, SummaryStats

logger = logging.getLogger(__name__)

ArrayLike = Union[pd.Series, np.ndarray, Sequence[float]]


def _as_array(x: ArrayLike, name: str = "series") -> np.ndarray:
    values = np.asarray(x, dtype=float)
    if values.ndim != 1:
        raise DataError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(values)):
        raise DataError(f"{name} contains missing or non-finite values")
    return values


def _require_variation(values: np.ndarray, name: str) -> None:
    if len(values) == 0 or np.ptp(values) == 0:
        raise NumericalError(f"{name} is constant; statistics requiring variance are undefined")


def summarize(
    x: ArrayLike,
    acf_lags: Optional[Iterable[int]] = None,
    q_lag: Optional[int] = None,
    name: str = "series",
) -> SummaryStats:
    """Moments, Jarque-Bera, ACF and Ljung-Box Q for one series.

    Skewness and kurtosis are moment (biased) estimators with kurtosis
    reported non-excess. The standard deviation uses divisor n - 1 and the
    autocorrelations divisor n.
    """
    acf_lags = sorted(set(acf_lags if acf_lags is not None else settings.acf_lags))
    q_lag = q_lag if q_lag is not None else settings.q_lag
    values = _as_array(x, name)
    n = len(values)
    if n < q_lag + 1 or (acf_lags and n <= max(acf_lags)):
        raise InsufficientHistoryError(f"{name} has {n} observations; need more than lag {max([q_lag, *acf_lags])}")
    _require_variation(values, name)

    jb, jb_p, skew, kurt = jarque_bera(values)
    rho = acf(values, nlags=max([q_lag, *acf_lags]), fft=False)
    lb = acorr_ljungbox(values, lags=[q_lag], return_df=True)

    return SummaryStats(
        mean=float(values.mean()),
        std_dev=float(values.std(ddof=1)),
        max=float(values.max()),
        min=float(values.min()),
        skewness=float(skew),
        kurtosis=float(kurt),
        jarque_bera=float(jb),
        jb_pvalue=float(jb_p),
        acf={lag: float(rho[lag]) for lag in acf_lags},
        ljung_box_q=float(lb["lb_stat"].iloc[0]),
        ljung_box_pvalue=float(lb["lb_pvalue"].iloc[0]),
        q_lag=q_lag,
        n=n,
    )


def correlation_matrix(series: Mapping[str, ArrayLike]) -> CorrelationMatrix:
    """Pairwise Pearson correlations with two-sided t-test p-values."""
    names = list(series)
    if len(names) < 2:
        raise DataError("correlation_matrix needs at least two series")
    arrays = {name: _as_array(series[name], name) for name in names}
    lengths = {len(a) for a in arrays.values()}
    if len(lengths) != 1:
        raise DataError(f"series lengths differ: { {k: len(v) for k, v in arrays.items()} }")
    n = lengths.pop()
    if n < 3:
        raise InsufficientHistoryError("correlation needs at least 3 observations")
    for name, values in arrays.items():
        _require_variation(values, name)

    corr = pd.DataFrame(np.eye(len(names)), index=names, columns=names)
    pvalues = pd.DataFrame(np.zeros((len(names), len(names))), index=names, columns=names)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            result = stats.pearsonr(arrays[a], arrays[b])
            rho = float(np.clip(result.statistic, -1.0, 1.0))
            corr.loc[a, b] = corr.loc[b, a] = rho
            pvalues.loc[a, b] = pvalues.loc[b, a] = float(result.pvalue)
    return CorrelationMatrix(corr=corr, pvalues=pvalues, n=n)


def standardize(x: ArrayLike) -> Union[pd.Series, np.ndarray]:
    """Z-score with the sample (n - 1) standard deviation; keeps a Series index."""
    values = _as_array(x)
    _require_variation(values, "series")
    z = (values - values.mean()) / values.std(ddof=1)
    if isinstance(x, pd.Series):
        return pd.Series(z, index=x.index, name=x.name)
    return z


def summary_table(
    series: Mapping[str, ArrayLike],
    acf_lags: Optional[Iterable[int]] = None,
    q_lag: Optional[int] = None,
) -> pd.DataFrame:
    """Summary statistics laid out one column per series, one row per statistic."""
    columns: Dict[str, Dict[str, float]] = {}
    for name, values in series.items():
        s = summarize(values, acf_lags=acf_lags, q_lag=q_lag, name=name)
        column = {
            "Mean": s.mean,
            "Std.Dev": s.std_dev,
            "Max": s.max,
            "Min": s.min,
            "Skewness": s.skewness,
            "Kurtosis": s.kurtosis,
            "J-B stat": s.jarque_bera,
            "J-B p-value": s.jb_pvalue,
        }
        column.update({f"ACF({lag})": v for lag, v in s.acf.items()})
        column[f"Q({s.q_lag})"] = s.ljung_box_q
        column[f"Q({s.q_lag}) p-value"] = s.ljung_box_pvalue
        column["N"] = s.n
        columns[name] = column
    return pd.DataFrame(columns)
