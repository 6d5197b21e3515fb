"""Mean-variance timing backtest on out-of-sample return forecasts."""

import logging
from typing import Tuple, Union

import numpy as np
import pandas as pd

from core.exceptions import DataError, InsufficientHistoryError
from core.models import BacktestConfig, BacktestReport, Frequency, OosEvaluation, PredictorSeries

logger = logging.getLogger(__name__)

FORECAST_COLUMNS = ("r", "r_mean", "r_var_forecast")


def rolling_variance(r: pd.Series, window: int, zero_tol: float = 1e-12) -> pd.Series:
    """Sample variance (n - 1) of the trailing ``window`` returns through each t.

    Periods whose variance falls below ``zero_tol`` are listed in
    ``attrs["degenerate"]``.
    """
    if window < 2:
        raise DataError("variance window must cover at least 2 periods")
    if len(r) < window:
        raise InsufficientHistoryError(f"rolling variance needs {window} periods, got {len(r)}")
    variance = r.astype(float).rolling(window).var(ddof=1).dropna().clip(lower=0.0).rename("variance")
    degenerate = variance.index[variance.to_numpy() < zero_tol].tolist()
    if degenerate:
        logger.warning("⚠️ Zero trailing variance in %d of %d windows", len(degenerate), len(variance))
    variance.attrs["degenerate"] = degenerate
    return variance


def risk_free_from_tbl(tbl: Union[PredictorSeries, pd.Series], frequency: Frequency) -> pd.Series:
    """Per-period simple risk-free return from an annualized T-bill yield."""
    values = tbl.values if isinstance(tbl, PredictorSeries) else tbl
    return (values.astype(float) / frequency.periods_per_year).rename("rf")


def certainty_equivalent(returns: Union[pd.Series, np.ndarray], gamma: float) -> float:
    """Average realized mean-variance utility, mean - gamma/2 * variance."""
    values = np.asarray(returns, dtype=float)
    return float(values.mean() - 0.5 * gamma * values.var(ddof=1))


def sharpe_ratio(excess: Union[pd.Series, np.ndarray]) -> float:
    """Per-period (not annualized) Sharpe ratio of an excess-return series."""
    values = np.asarray(excess, dtype=float)
    sd = values.std(ddof=1)
    return float(values.mean() / sd) if sd > 0 else float("nan")


def _weights(
    forecast: np.ndarray, rf: np.ndarray, variance: np.ndarray, cfg: BacktestConfig
) -> Tuple[np.ndarray, int]:
    excess = forecast - rf
    degenerate = variance < cfg.zero_variance_tol
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = excess / (cfg.gamma * variance)
    raw = np.where(degenerate, np.where(excess > 0, cfg.weight_upper, cfg.weight_lower), raw)
    outside = int(np.sum((raw < cfg.weight_lower) | (raw > cfg.weight_upper)))
    return np.clip(raw, cfg.weight_lower, cfg.weight_upper), outside


def run_backtest(
    forecasts: Union[OosEvaluation, pd.DataFrame],
    r: pd.Series,
    risk_free: pd.Series,
    cfg: BacktestConfig,
) -> BacktestReport:
    """Benchmark (historical mean) and model (VAR) investors over the OOS window.

    ``r`` is the full return history used for the rolling variance, so the
    variance window must fit before the first evaluation period. Weights
    for period t use the variance through t-1.
    """
    frame = forecasts.forecasts if isinstance(forecasts, OosEvaluation) else forecasts
    missing = [c for c in FORECAST_COLUMNS if c not in frame.columns]
    if missing:
        raise DataError(f"forecast frame lacks columns {missing}")
    if frame.empty:
        raise InsufficientHistoryError("empty evaluation window")

    trailing = rolling_variance(r, cfg.variance_window, cfg.zero_variance_tol)
    variance = trailing.reindex(r.index).shift(1).reindex(frame.index)
    if variance.isna().any():
        first = frame.index[int(np.argmax(variance.isna().to_numpy()))]
        raise InsufficientHistoryError(
            f"fewer than {cfg.variance_window} returns precede evaluation period {first}"
        )
    rf = risk_free.reindex(frame.index).astype(float)
    if rf.isna().any():
        raise DataError(f"risk-free rate missing for {int(rf.isna().sum())} evaluation periods")

    realized = frame["r"].to_numpy(dtype=float)
    rf_values = rf.to_numpy()
    var_values = variance.to_numpy()
    degenerate = int(np.sum(var_values < cfg.zero_variance_tol))
    w_bench, clamped_bench = _weights(frame["r_mean"].to_numpy(dtype=float), rf_values, var_values, cfg)
    w_model, clamped_model = _weights(frame["r_var_forecast"].to_numpy(dtype=float), rf_values, var_values, cfg)
    if clamped_bench or clamped_model:
        logger.info(
            "Clamped weights to [%g, %g]: %d benchmark, %d model",
            cfg.weight_lower,
            cfg.weight_upper,
            clamped_bench,
            clamped_model,
        )

    excess = realized - rf_values
    ret_bench = w_bench * excess + rf_values
    ret_model = w_model * excess + rf_values
    ledger = pd.DataFrame(
        {
            "weight_bench": w_bench,
            "weight_model": w_model,
            "ret_bench": ret_bench,
            "ret_model": ret_model,
            "rf": rf_values,
        },
        index=frame.index,
    )

    nu_bench = certainty_equivalent(ret_bench, cfg.gamma)
    nu_model = certainty_equivalent(ret_model, cfg.gamma)
    return BacktestReport(
        ledger=ledger,
        nu_bench=nu_bench,
        nu_model=nu_model,
        cer_gain=cfg.annualization * (nu_model - nu_bench),
        sharpe_model=sharpe_ratio(ret_model - rf_values),
        sharpe_bench=sharpe_ratio(ret_bench - rf_values),
        sharpe_buy_hold=sharpe_ratio(excess),
        clamped_bench=clamped_bench,
        clamped_model=clamped_model,
        gamma=cfg.gamma,
        annualization=cfg.annualization,
        degenerate_windows=degenerate,
    )
