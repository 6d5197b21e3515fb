"""VAR(q) forecasts of PMG and PML, the ARCH-in-Mean benchmark and OOS evaluation."""

import logging
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy import stats
from scipy.special import expit, logit
from statsmodels.tsa.api import VAR

from core.config import settings
from core.exceptions import DataError, InsufficientHistoryError, NumericalError
from core.models import (
    ArchInMeanFit,
    BacktestConfig,
    BacktestReport,
    Convergence,
    DecomposedSeries,
    Frequency,
    LeverageForm,
    OosEvaluation,
    VarFit,
)
from services.likelihood import PENALTY, hessian_std_errors, minimize_negloglik
from services.portfolio import run_backtest

logger = logging.getLogger(__name__)

ENDOGENOUS = ("pmg", "pml")
MIN_TRAINING = {Frequency.MONTHLY: 120, Frequency.QUARTERLY: 40, Frequency.DAILY: 120}
MIN_ARCH_IN_MEAN = 100


# VAR


def _var_frame(pmg: pd.Series, pml: pd.Series) -> pd.DataFrame:
    if len(pmg) != len(pml):
        raise DataError(f"PMG and PML lengths differ ({len(pmg)} vs {len(pml)})")
    frame = pd.DataFrame({"pmg": np.asarray(pmg, dtype=float), "pml": np.asarray(pml, dtype=float)})
    if isinstance(pmg, pd.Series):
        frame.index = pmg.index
    if frame.isna().any().any():
        raise DataError("VAR inputs contain missing values")
    return frame


def fit_var(pmg: pd.Series, pml: pd.Series, q_max: int) -> VarFit:
    """Select q in 1..q_max by SIC on a common sample and return that fit.

    Every candidate order is estimated on targets q_max..n-1, so the
    criteria compare like with like. Ties go to the smaller order.
    """
    data = _var_frame(pmg, pml)
    n = len(data)
    if q_max < 1:
        raise DataError("q_max must be at least 1")
    if n <= 10 * q_max:
        raise InsufficientHistoryError(f"VAR with q_max={q_max} needs more than {10 * q_max} observations, got {n}")

    candidates = {}
    for q in range(1, q_max + 1):
        window = data.iloc[q_max - q :].reset_index(drop=True)
        result = VAR(window).fit(q, trend="c")
        t_eff = result.nobs
        sign, logdet = np.linalg.slogdet(np.asarray(result.sigma_u_mle, dtype=float))
        if sign <= 0:
            raise NumericalError(f"VAR({q}) residual covariance is singular")
        k = len(ENDOGENOUS) * (2 * q + 1)
        candidates[q] = (logdet + k * np.log(t_eff) / t_eff, result, window)

    sic_by_order = {q: float(c[0]) for q, c in candidates.items()}
    q = min(sic_by_order, key=lambda order: (sic_by_order[order], order))
    sic, result, window = candidates[q]

    names = VarFit.coefficient_names(q)
    coefs = pd.DataFrame(np.asarray(result.params, dtype=float).T, index=list(ENDOGENOUS), columns=names)
    tvalues = pd.DataFrame(np.asarray(result.tvalues, dtype=float).T, index=list(ENDOGENOUS), columns=names)
    actual = window.iloc[q:].to_numpy()
    resid = np.asarray(result.resid, dtype=float)
    rsquared = {
        name: float(1.0 - np.sum(resid[:, i] ** 2) / np.sum((actual[:, i] - actual[:, i].mean()) ** 2))
        for i, name in enumerate(ENDOGENOUS)
    }
    logger.info("VAR order %d selected by SIC (%s)", q, ", ".join(f"q={k}: {v:.4f}" for k, v in sic_by_order.items()))
    return VarFit(
        q=q,
        coefs=coefs,
        data=data,
        first_target=q_max,
        tvalues=tvalues,
        sigma_u=np.asarray(result.sigma_u, dtype=float),
        rsquared=rsquared,
        sic=float(sic),
        sic_by_order=sic_by_order,
        n_obs=int(result.nobs),
    )


def _lag_design(values: np.ndarray, q: int, positions: np.ndarray) -> np.ndarray:
    columns = [np.ones(len(positions))]
    columns += [values[positions - i] for i in range(1, q + 1)]
    return np.column_stack(columns)


def forecast_returns(fit: VarFit, mode: str = "in_sample", data: Optional[pd.DataFrame] = None) -> pd.Series:
    """One-step-ahead r^p = PMG^p - PML^p with the coefficients held fixed.

    ``in_sample`` covers the fitted targets. ``static_oos`` covers the rows
    of ``data`` after the fitting window; ``data`` must extend that window.
    """
    if mode == "in_sample":
        frame = fit.data
        positions = np.arange(fit.first_target, len(frame))
    elif mode == "static_oos":
        if data is None:
            raise DataError("static out-of-sample forecasts need the full data")
        frame = data.loc[:, list(ENDOGENOUS)]
        if len(frame) <= len(fit.data) or not frame.index[: len(fit.data)].equals(fit.data.index):
            raise DataError("out-of-sample data must extend the fitting window")
        positions = np.arange(len(fit.data), len(frame))
    else:
        raise DataError(f"unknown forecast mode '{mode}'")

    values = frame.loc[:, list(ENDOGENOUS)].to_numpy(dtype=float)
    predicted = _lag_design(values, fit.q, positions) @ fit.coefs.to_numpy().T
    return pd.Series(predicted[:, 0] - predicted[:, 1], index=frame.index[positions], name="r_var_forecast")


def var_report(fit: VarFit) -> pd.DataFrame:
    """Coefficients with t-statistics, one row per regressor."""
    report = pd.DataFrame(index=list(fit.coefs.columns))
    for equation in ENDOGENOUS:
        report[f"{equation}_coef"] = fit.coefs.loc[equation]
        if fit.tvalues is not None:
            report[f"{equation}_t"] = fit.tvalues.loc[equation]
    report.loc["R²", [f"{e}_coef" for e in ENDOGENOUS]] = [fit.rsquared[e] for e in ENDOGENOUS]
    report.index.name = "regressor"
    report.attrs.update(q=fit.q, sic=fit.sic, n_obs=fit.n_obs)
    return report


# ARCH-in-Mean benchmark


class _ArchInMean:
    """r_t = d0 + d1 r_{t-1} + d2 h_t + e_t with a GARCH(1,1)-type h_t^2."""

    names = ("delta0", "delta1", "delta2", "log_omega0", "persistence", "share", "omega3")

    def __init__(self, r: np.ndarray, leverage: LeverageForm, presample: float):
        self.r = r
        self.leverage = leverage
        self.presample = presample

    @staticmethod
    def variance_params(theta: np.ndarray) -> Tuple[float, float, float, float]:
        persistence, share = expit(theta[4]), expit(theta[5])
        return float(np.exp(theta[3])), persistence * (1.0 - share), persistence * share, float(theta[6])

    def paths(self, theta: np.ndarray):
        d0, d1, d2 = theta[:3]
        omega0, omega1, omega2, omega3 = self.variance_params(theta)
        r = self.r
        n = len(r) - 1
        h2 = np.empty(n)
        e = np.empty(n)
        prev_h2, prev_e = self.presample, 0.0
        squared = self.leverage is LeverageForm.SQUARED_SHOCK
        for t in range(n):
            negative = 1.0 if prev_e < 0 else 0.0
            shift = prev_e * prev_e * negative if squared else negative
            current = omega0 + omega1 * prev_h2 + omega2 * prev_e * prev_e + omega3 * shift
            if current <= 0:
                return None
            h2[t] = current
            e[t] = r[t + 1] - (d0 + d1 * r[t] + d2 * np.sqrt(current))
            prev_h2, prev_e = current, e[t]
        return e, h2

    def __call__(self, theta: np.ndarray) -> float:
        out = self.paths(theta)
        if out is None:
            return PENALTY
        e, h2 = out
        return float(0.5 * np.sum(np.log(2.0 * np.pi) + np.log(h2) + e**2 / h2))


def fit_arch_in_mean(
    r: pd.Series,
    constant_variance: bool = False,
    leverage: Optional[LeverageForm] = None,
) -> ArchInMeanFit:
    """Quasi-ML fit of the ARCH-in-Mean return benchmark.

    With ``constant_variance`` the variance recursion is dropped; h_t is
    then constant and d2 is not identified, so it is fixed at 0 and the
    mean equation is plain OLS on r_{t-1}.
    """
    leverage = LeverageForm(leverage or settings.leverage)
    values = np.asarray(r, dtype=float)
    index = r.index[1:] if isinstance(r, pd.Series) else pd.RangeIndex(1, len(values))
    if not np.all(np.isfinite(values)):
        raise DataError("return series contains missing values")
    if np.ptp(values) == 0:
        raise NumericalError("return series is constant")

    ols = sm.OLS(values[1:], sm.add_constant(values[:-1], has_constant="add")).fit()
    target = values[1:]
    sst = float(np.sum((target - target.mean()) ** 2))

    if constant_variance:
        if len(values) < 10:
            raise InsufficientHistoryError("ARCH-in-Mean needs at least 10 observations")
        sigma2 = float(ols.ssr / ols.nobs)
        loglik = float(-0.5 * ols.nobs * (np.log(2.0 * np.pi * sigma2) + 1.0))
        bse = np.asarray(ols.bse, dtype=float)
        return ArchInMeanFit(
            delta=(float(ols.params[0]), float(ols.params[1]), 0.0),
            omega=(sigma2, 0.0, 0.0, 0.0),
            log_likelihood=loglik,
            r_squared=float(ols.rsquared),
            constant_variance=True,
            leverage=leverage,
            convergence=Convergence.CONVERGED,
            conditional_volatility=pd.Series(np.sqrt(sigma2), index=index, name="h"),
            fitted=pd.Series(np.asarray(ols.fittedvalues, dtype=float), index=index, name="fitted"),
            std_errors={"delta0": float(bse[0]), "delta1": float(bse[1]), "delta2": float("nan")},
        )

    if len(values) < MIN_ARCH_IN_MEAN:
        raise InsufficientHistoryError(f"ARCH-in-Mean needs at least {MIN_ARCH_IN_MEAN} observations")
    presample = float(np.var(ols.resid))
    theta0 = np.array(
        [
            ols.params[0],
            ols.params[1],
            0.0,
            np.log(settings.omega_start_share * presample),
            logit(settings.arch_start + settings.garch_start),
            logit(settings.arch_start / (settings.arch_start + settings.garch_start)),
            0.0,
        ]
    )
    objective = _ArchInMean(values, leverage, presample)
    outcome = minimize_negloglik(objective, theta0, settings.max_iter, settings.rel_tol, settings.max_restarts)
    e, h2 = objective.paths(outcome.x)
    omega0, omega1, omega2, omega3 = objective.variance_params(outcome.x)

    status = outcome.status
    if min(omega1, omega2) < settings.boundary_tol or omega1 + omega2 > 1.0 - settings.boundary_tol:
        status = Convergence.BOUNDARY
    errors = hessian_std_errors(objective, outcome.x, _ArchInMean.names)
    h = np.sqrt(h2)
    return ArchInMeanFit(
        delta=tuple(float(v) for v in outcome.x[:3]),
        omega=(omega0, omega1, omega2, omega3),
        log_likelihood=-outcome.fun,
        r_squared=float(1.0 - np.sum(e**2) / sst),
        constant_variance=False,
        leverage=leverage,
        convergence=status,
        conditional_volatility=pd.Series(h, index=index, name="h"),
        fitted=pd.Series(target - e, index=index, name="fitted"),
        std_errors={k: errors[k] for k in ("delta0", "delta1", "delta2")},
    )


# Out-of-sample evaluation


def r2_oos(r: Sequence[float], r_model: Sequence[float], r_bench: Sequence[float]) -> float:
    """1 - MSPE(model) / MSPE(benchmark)."""
    r, r_model, r_bench = (np.asarray(v, dtype=float) for v in (r, r_model, r_bench))
    if len(r) == 0:
        raise InsufficientHistoryError("empty evaluation window")
    bench = float(np.sum((r - r_bench) ** 2))
    if bench == 0:
        raise NumericalError("benchmark forecasts are exact; R²_OOS is undefined")
    return 1.0 - float(np.sum((r - r_model) ** 2)) / bench


def clark_west(r: Sequence[float], r_model: Sequence[float], r_bench: Sequence[float]) -> Tuple[float, float]:
    """MSPE-adjusted statistic and its one-sided (upper-tail) normal p-value.

    f_t = (r - r_bench)^2 - [(r - r_model)^2 - (r_bench - r_model)^2] is
    regressed on a constant; the statistic is the intercept's t-value.
    """
    r, r_model, r_bench = (np.asarray(v, dtype=float) for v in (r, r_model, r_bench))
    n = len(r)
    if n < 2:
        raise InsufficientHistoryError("Clark-West needs at least two evaluation periods")
    f = (r - r_bench) ** 2 - ((r - r_model) ** 2 - (r_bench - r_model) ** 2)
    mean, sd = float(f.mean()), float(f.std(ddof=1))
    if sd == 0:
        if mean == 0:
            return 0.0, 0.5
        stat = float(np.sign(mean) * np.inf)
    else:
        stat = mean / (sd / np.sqrt(n))
    return float(stat), float(stats.norm.sf(stat))


def _split_position(index: pd.PeriodIndex, split: Union[str, pd.Period]) -> Tuple[pd.Period, int]:
    period = pd.Period(split, freq=index.freqstr)
    position = int(index.searchsorted(period))
    return period, position


def evaluate_oos(
    pmg: pd.Series,
    pml: pd.Series,
    r: pd.Series,
    split: Union[str, pd.Period],
    q_max: Optional[int] = None,
) -> OosEvaluation:
    """Static out-of-sample evaluation with the VAR frozen at ``split``.

    The training window is every period before ``split``; the benchmark is
    the expanding mean of r through t-1.
    """
    data = _var_frame(pmg, pml)
    if not isinstance(data.index, pd.PeriodIndex):
        raise DataError("out-of-sample evaluation needs period-indexed series")
    frequency = Frequency.of_index(data.index)
    q_max = q_max or settings.var_q_max(frequency)
    period, position = _split_position(data.index, split)
    if position >= len(data):
        raise InsufficientHistoryError(f"split {period} leaves an empty evaluation window")
    minimum = MIN_TRAINING[frequency]
    if position < minimum:
        raise InsufficientHistoryError(f"split {period} leaves {position} training periods; need {minimum}")
    q_fit = min(q_max, (position - 1) // 10)
    if q_fit < q_max:
        logger.warning("⚠️ Training window too short for q_max=%d; using %d", q_max, q_fit)

    fit = fit_var(data["pmg"].iloc[:position], data["pml"].iloc[:position], q_fit)
    predicted = forecast_returns(fit, "static_oos", data)
    realized = pd.Series(np.asarray(r, dtype=float), index=data.index, name="r")
    bench = realized.expanding().mean().shift(1)
    forecasts = pd.DataFrame(
        {"r": realized, "r_mean": bench, "r_var_forecast": predicted}
    ).iloc[position:]

    r2 = r2_oos(forecasts["r"], forecasts["r_var_forecast"], forecasts["r_mean"])
    cw_stat, cw_p = clark_west(forecasts["r"], forecasts["r_var_forecast"], forecasts["r_mean"])
    logger.info("OOS from %s: R²_OOS %.4f, Clark-West %.3f (p=%.3f)", period, r2, cw_stat, cw_p)
    return OosEvaluation(
        split=period,
        split_index=position,
        q=fit.q,
        forecasts=forecasts,
        r2_oos=r2,
        cw_stat=cw_stat,
        cw_pvalue=cw_p,
        var_fit=fit,
    )


def evaluate_splits(
    d: DecomposedSeries,
    splits: Iterable[Union[str, pd.Period]],
    risk_free: Optional[pd.Series] = None,
    cfg: Optional[BacktestConfig] = None,
    q_max: Optional[int] = None,
) -> List[Tuple[OosEvaluation, Optional[BacktestReport]]]:
    """Evaluate and, given a risk-free series, backtest every split in order."""
    results = []
    for split in splits:
        evaluation = evaluate_oos(d.pmg, d.pml, d.r, split, q_max)
        report = None
        if risk_free is not None:
            config = cfg or BacktestConfig.for_frequency(Frequency.of_index(d.frame.index))
            report = run_backtest(evaluation, d.r, risk_free, config)
        results.append((evaluation, report))
    return results


def oos_table(results: Sequence[Tuple[OosEvaluation, Optional[BacktestReport]]]) -> pd.DataFrame:
    """One column per split: R²_OOS, Clark-West and, when available, CER and Sharpe ratios."""
    columns = {}
    for evaluation, report in results:
        column = {
            "q": evaluation.q,
            "R²_OOS (%)": 100.0 * evaluation.r2_oos,
            "CW stat": evaluation.cw_stat,
            "CW p-value": evaluation.cw_pvalue,
            "N": len(evaluation.forecasts),
        }
        if report is not None:
            column.update(
                {"CER gain (%)": report.cer_gain, "SR^p": report.sharpe_model, "SR^bh": report.sharpe_buy_hold}
            )
        columns[str(evaluation.split)] = column
    return pd.DataFrame(columns)


# In-sample horizons


def _in_sample_return_r2(d: DecomposedSeries, q_max: int) -> Tuple[int, float]:
    fit = fit_var(d.pmg, d.pml, q_max)
    predicted = forecast_returns(fit, "in_sample")
    realized = d.r.loc[predicted.index]
    sst = float(np.sum((realized - realized.mean()) ** 2))
    return fit.q, 1.0 - float(np.sum((realized - predicted) ** 2)) / sst


def in_sample_table(
    d: DecomposedSeries,
    windows: Optional[Sequence[Tuple[Optional[int], Optional[int]]]] = None,
    q_max: Optional[int] = None,
    constant_variance: Optional[bool] = None,
    leverage: Optional[LeverageForm] = None,
) -> pd.DataFrame:
    """In-sample return R² of VAR(q) and ARCH-in-Mean over year windows.

    A window bound of None means the sample edge. The predictability ratio
    is VAR R² divided by ARCH-in-Mean R².
    """
    frequency = Frequency.of_index(d.frame.index)
    windows = windows if windows is not None else settings.in_sample_windows
    q_max = q_max or settings.var_q_max(frequency)
    if constant_variance is None:
        constant_variance = frequency is Frequency.QUARTERLY

    years = d.frame.index.year
    columns = {}
    for start, end in windows:
        mask = np.ones(len(d), dtype=bool)
        if start is not None:
            mask &= years >= start
        if end is not None:
            mask &= years <= end
        if not mask.any():
            logger.warning("⚠️ No observations in window %s-%s; skipped", start, end)
            continue
        window = DecomposedSeries(convention=d.convention, frame=d.frame[mask])
        label = f"{window.frame.index[0].year}-{window.frame.index[-1].year}"
        q, var_r2 = _in_sample_return_r2(window, q_max)
        aim = fit_arch_in_mean(window.r, constant_variance=constant_variance, leverage=leverage)
        ratio = var_r2 / aim.r_squared if aim.r_squared > 0 else float("nan")
        columns[label] = {
            "q": q,
            "VAR(q) (%)": 100.0 * var_r2,
            "ARCH-in-Mean (%)": 100.0 * aim.r_squared,
            "Predictability ratio": ratio,
        }
    return pd.DataFrame(columns)
