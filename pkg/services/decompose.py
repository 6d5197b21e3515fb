"""Splitting period returns into overnight return, PMG and PML."""

import logging
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np
import pandas as pd
from scipy import stats

from core.exceptions import DataError, InsufficientHistoryError, NumericalError
from core.models import (
    BarSeries,
    Convention,
    CovarianceDecomposition,
    DecomposedSeries,
    Frequency,
    RegressionSummary,
)
from services.market_data import format_period, log_prices

logger = logging.getLogger(__name__)

DECOMPOSED_COLUMNS = ("r_full", "r", "ovr", "pmg", "pml")


def decompose(series: BarSeries, convention: Convention = Convention.HIGH_EXTREME) -> DecomposedSeries:
    """Decompose each period's log return around the high or low extreme.

    High extreme: PMG = ln H - ln O, PML = ln H - ln C.
    Low extreme:  PMG = ln C - ln L, PML = ln O - ln L.
    Both share OVR = ln O_t - ln C_{t-1}, so r_full = OVR + PMG - PML and
    r = PMG - PML = ln C - ln O. The first bar only supplies the lagged close.
    """
    convention = Convention(convention)
    if len(series) < 2:
        raise InsufficientHistoryError(f"decomposition needs at least 2 bars, got {len(series)}")
    prices = series.frame
    if (prices.to_numpy() <= 0).any():
        raise DataError("non-positive price; cannot take logarithms")
    logs = log_prices(series)
    log_o, log_h, log_l, log_c = (logs[c] for c in ("open", "high", "low", "close"))
    prev_close = log_c.shift(1)

    if convention is Convention.HIGH_EXTREME:
        pmg = log_h - log_o
        pml = log_h - log_c
    else:
        pmg = log_c - log_l
        pml = log_o - log_l

    frame = pd.DataFrame(
        {
            "r_full": log_c - prev_close,
            "r": log_c - log_o,
            "ovr": log_o - prev_close,
            "pmg": pmg,
            "pml": pml,
        }
    ).iloc[1:]
    return DecomposedSeries(convention=convention, frame=frame)


def overnight_share(d: DecomposedSeries) -> RegressionSummary:
    """OLS of the full return r_full on the overnight-free return r."""
    if len(d) < 3:
        raise InsufficientHistoryError("overnight_share needs at least 3 periods")
    r = d.r.to_numpy()
    if np.ptp(r) == 0:
        raise NumericalError("r has zero variance; the overnight regression is undefined")
    fit = stats.linregress(r, d.r_full.to_numpy())
    return RegressionSummary(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=float(fit.rvalue**2),
        n=len(r),
    )


def _lagged_cov(a: np.ndarray, b: np.ndarray, lag: int) -> float:
    # Cov(a_t, b_{t-lag}) over t = lag..n-1, divisor n - lag
    lead, lagged = a[lag:], b[: len(b) - lag]
    return float(np.mean((lead - lead.mean()) * (lagged - lagged.mean())))


def covariance_decomposition(d: DecomposedSeries, lag: int) -> CovarianceDecomposition:
    """Four lagged PMG/PML covariances and their signed sum.

    On the same aligned window and divisor the signed sum equals the
    lag-``lag`` autocovariance of r = PMG - PML.
    """
    if lag < 1:
        raise DataError("lag must be a positive integer")
    if lag >= len(d):
        raise InsufficientHistoryError(f"lag {lag} is not below the series length {len(d)}")
    g, l = d.pmg.to_numpy(), d.pml.to_numpy()
    if np.ptp(g) == 0 or np.ptp(l) == 0:
        raise NumericalError("PMG or PML is constant; covariances are degenerate")
    gg = _lagged_cov(g, g, lag)
    ll = _lagged_cov(l, l, lag)
    gl = _lagged_cov(g, l, lag)
    lg = _lagged_cov(l, g, lag)
    r = g - l
    return CovarianceDecomposition(
        lag=lag,
        cov_pmg_pmg=gg,
        cov_pml_pml=ll,
        cov_pmg_pml=gl,
        cov_pml_pmg=lg,
        combined=gg + ll - gl - lg,
        cov_r=_lagged_cov(r, r, lag),
        n=len(d) - lag,
    )


def covariance_table(d: DecomposedSeries, lags: Iterable[int] = range(1, 7)) -> pd.DataFrame:
    rows = [covariance_decomposition(d, lag).model_dump() for lag in lags]
    return pd.DataFrame(rows).set_index("lag")


def write_decomposed(
    d: DecomposedSeries, path: Union[str, Path], header: Optional[Iterable[str]] = None
) -> Path:
    """Write ``date,r_full,r,ovr,pmg,pml``; optional header lines are '#'-prefixed."""
    path = Path(path)
    out = d.frame.loc[:, list(DECOMPOSED_COLUMNS)].copy()
    frequency = Frequency.of_index(out.index)
    out.index = [format_period(p, frequency) for p in out.index]
    out.index.name = "date"
    with path.open("w", newline="", encoding="utf-8") as fh:
        for line in header or ():
            fh.write(f"# {line}\n")
        out.to_csv(fh, float_format="%.17g")
    return path
