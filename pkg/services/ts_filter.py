"""ARMA(l,m)-GARCH(p,q) quasi-maximum-likelihood filtering.

The mean equation is

    y_t = mu + sum_i ar_i y_{t-i} + e_t + sum_j ma_j e_{t-j}

and, unless the spec is constant-variance,

    sigma2_t = omega + arch_coef * e_{t-1}^2 + garch_coef * sigma2_{t-1}.

The recursions are conditional: pre-sample y equals the sample mean,
pre-sample residuals are 0 and the pre-sample variance is the variance of
a preliminary least-squares ARMA pass.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.signal import lfilter
from scipy.special import expit, logit
from statsmodels.tsa.arima.estimators.hannan_rissanen import hannan_rissanen
from statsmodels.tsa.arima_process import ArmaProcess
from statsmodels.tsa.statespace.tools import (
    constrain_stationary_univariate,
    unconstrain_stationary_univariate,
)

from core.config import settings
from core.exceptions import DataError, InsufficientHistoryError, NumericalError
from core.models import ArmaGarchFit, ArmaGarchSpec, Convergence
from services.desc_stats import standardize
from services.likelihood import PENALTY, hessian_std_errors, minimize_negloglik

logger = logging.getLogger(__name__)

MIN_OBSERVATIONS = 50
_LOG_2PI = np.log(2.0 * np.pi)


def default_grid() -> List[ArmaGarchSpec]:
    """l, m in {1, 2} with and without GARCH(1,1) variance dynamics."""
    return [
        ArmaGarchSpec(l=l, m=m, p=p, q=p)
        for l in (1, 2)
        for m in (1, 2)
        for p in (1, 0)
    ]


def sqrt_transform(x: Union[pd.Series, np.ndarray]) -> Union[pd.Series, np.ndarray]:
    values = np.asarray(x, dtype=float)
    if np.any(values < 0):
        raise DataError("square-root transform needs non-negative input")
    if isinstance(x, pd.Series):
        return pd.Series(np.sqrt(values), index=x.index, name=x.name)
    return np.sqrt(values)


# Recursions


def mean_residuals(y: np.ndarray, mu: float, ar: Sequence[float], ma: Sequence[float], ybar: float) -> np.ndarray:
    l = len(ar)
    padded = np.r_[np.full(l, ybar), y]
    x = y - mu
    for i, phi in enumerate(ar, start=1):
        x = x - phi * padded[l - i : l - i + len(y)]
    return lfilter([1.0], np.r_[1.0, np.asarray(ma, dtype=float)], x)


def garch_variance(e: np.ndarray, omega: float, arch_coef: float, garch_coef: float, presample: float) -> np.ndarray:
    shocks = np.empty_like(e)
    shocks[0] = 0.0
    shocks[1:] = e[:-1] ** 2
    sigma2, _ = lfilter([1.0], [1.0, -garch_coef], omega + arch_coef * shocks, zi=[garch_coef * presample])
    return sigma2


def _gaussian_loglik(e: np.ndarray, sigma2: np.ndarray) -> float:
    return float(-0.5 * np.sum(_LOG_2PI + np.log(sigma2) + e**2 / sigma2))


# Parameter transforms


def _split(theta: np.ndarray, spec: ArmaGarchSpec) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    l, m = spec.l, spec.m
    return theta[0], theta[1 : 1 + l], theta[1 + l : 1 + l + m], theta[1 + l + m :]


def _to_natural(theta: np.ndarray, spec: ArmaGarchSpec) -> np.ndarray:
    mu, u_ar, u_ma, u_var = _split(theta, spec)
    ar = constrain_stationary_univariate(u_ar) if spec.l else u_ar
    ma = -constrain_stationary_univariate(u_ma) if spec.m else u_ma
    if spec.constant_variance:
        variance = np.exp(u_var)
    else:
        persistence, share = expit(u_var[1]), expit(u_var[2])
        variance = np.array([np.exp(u_var[0]), persistence * share, persistence * (1.0 - share)])
    return np.r_[mu, ar, ma, variance]


def _to_unconstrained(natural: np.ndarray, spec: ArmaGarchSpec) -> np.ndarray:
    mu, ar, ma, variance = _split(np.asarray(natural, dtype=float), spec)
    u_ar = unconstrain_stationary_univariate(ar) if spec.l else ar
    u_ma = unconstrain_stationary_univariate(-ma) if spec.m else ma
    if spec.constant_variance:
        u_var = np.log(variance)
    else:
        omega, arch_coef, garch_coef = variance
        persistence = arch_coef + garch_coef
        u_var = np.array([np.log(omega), logit(persistence), logit(arch_coef / persistence)])
    return np.r_[mu, u_ar, u_ma, u_var]


def _param_names(spec: ArmaGarchSpec) -> List[str]:
    names = ["mu"] + [f"ar{i}" for i in range(1, spec.l + 1)] + [f"ma{j}" for j in range(1, spec.m + 1)]
    return names + (["sigma2"] if spec.constant_variance else ["omega", "arch1", "garch1"])


def _admissible(natural: np.ndarray, spec: ArmaGarchSpec) -> bool:
    _, ar, ma, variance = _split(natural, spec)
    if spec.l and not ArmaProcess(np.r_[1.0, -ar], [1.0]).isstationary:
        return False
    if spec.m and not ArmaProcess([1.0], np.r_[1.0, ma]).isinvertible:
        return False
    if spec.constant_variance:
        return variance[0] > 0
    omega, arch_coef, garch_coef = variance
    return omega > 0 and arch_coef >= 0 and garch_coef >= 0 and arch_coef + garch_coef < 1


class _Likelihood:
    """Negative quasi-log-likelihood of one spec on one sample."""

    def __init__(self, y: np.ndarray, spec: ArmaGarchSpec, presample_variance: float):
        self.y = y
        self.spec = spec
        self.ybar = float(y.mean())
        self.presample_variance = presample_variance

    def paths(self, natural: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        mu, ar, ma, variance = _split(natural, self.spec)
        e = mean_residuals(self.y, mu, ar, ma, self.ybar)
        if self.spec.constant_variance:
            sigma2 = np.full_like(e, variance[0])
        else:
            sigma2 = garch_variance(e, *variance, self.presample_variance)
        return e, sigma2

    def natural(self, natural: np.ndarray) -> float:
        if not _admissible(natural, self.spec):
            return PENALTY
        e, sigma2 = self.paths(natural)
        if np.any(sigma2 <= 0):
            return PENALTY
        return -_gaussian_loglik(e, sigma2)

    def unconstrained(self, theta: np.ndarray) -> float:
        natural = _to_natural(theta, self.spec)
        e, sigma2 = self.paths(natural)
        if np.any(sigma2 <= 0):
            return PENALTY
        return -_gaussian_loglik(e, sigma2)


def _starting_arma(y: np.ndarray, spec: ArmaGarchSpec) -> Tuple[np.ndarray, np.ndarray]:
    ar, ma = np.zeros(spec.l), np.zeros(spec.m)
    if spec.l + spec.m == 0:
        return ar, ma
    try:
        params, _ = hannan_rissanen(y, ar_order=spec.l, ma_order=spec.m, demean=True)
        ar = np.asarray(params.ar_params, dtype=float).reshape(spec.l)
        ma = np.asarray(params.ma_params, dtype=float).reshape(spec.m)
    except (ValueError, np.linalg.LinAlgError) as e:
        logger.debug("Least-squares ARMA start failed for %s: %s", spec.label, e)
        return np.zeros(spec.l), np.zeros(spec.m)
    # shrink anything outside the stationary / invertible region
    if spec.l and not ArmaProcess(np.r_[1.0, -ar], [1.0]).isstationary:
        ar = np.zeros(spec.l)
    if spec.m and not ArmaProcess([1.0], np.r_[1.0, ma]).isinvertible:
        ma = np.zeros(spec.m)
    return ar, ma


def fit(
    y: Union[pd.Series, np.ndarray],
    spec: ArmaGarchSpec,
    max_iter: Optional[int] = None,
    rel_tol: Optional[float] = None,
    std_errors: bool = True,
) -> ArmaGarchFit:
    """Gaussian QML fit of one ARMA-GARCH spec."""
    max_iter = max_iter or settings.max_iter
    rel_tol = rel_tol or settings.rel_tol
    index = y.index if isinstance(y, pd.Series) else pd.RangeIndex(len(y))
    values = np.asarray(y, dtype=float)
    if len(values) < MIN_OBSERVATIONS:
        raise InsufficientHistoryError(f"{spec.label} needs at least {MIN_OBSERVATIONS} observations, got {len(values)}")
    if not np.all(np.isfinite(values)):
        raise DataError("series to filter contains missing or non-finite values")
    if np.ptp(values) == 0:
        raise NumericalError("series to filter is constant")

    ar0, ma0 = _starting_arma(values, spec)
    ybar = float(values.mean())
    mu0 = ybar * (1.0 - ar0.sum())
    presample = float(np.var(mean_residuals(values, mu0, ar0, ma0, ybar)))
    if presample <= 0:
        presample = float(np.var(values))

    if spec.constant_variance:
        variance0 = [presample]
    else:
        variance0 = [settings.omega_start_share * presample, settings.arch_start, settings.garch_start]
    natural0 = np.r_[mu0, ar0, ma0, variance0]

    likelihood = _Likelihood(values, spec, presample)
    outcome = minimize_negloglik(
        likelihood.unconstrained, _to_unconstrained(natural0, spec), max_iter, rel_tol, settings.max_restarts
    )
    natural = _to_natural(outcome.x, spec)
    e, sigma2 = likelihood.paths(natural)
    mu, ar, ma, variance = _split(natural, spec)

    status = outcome.status
    if spec.constant_variance:
        omega, arch_coef, garch_coef = float(variance[0]), 0.0, 0.0
    else:
        omega, arch_coef, garch_coef = (float(v) for v in variance)
        tol = settings.boundary_tol
        if min(arch_coef, garch_coef) < tol or arch_coef + garch_coef > 1.0 - tol:
            status = Convergence.BOUNDARY
            logger.info("%s estimate lies on the parameter boundary", spec.label)

    names = _param_names(spec)
    errors = hessian_std_errors(likelihood.natural, natural, names) if std_errors else {}
    log_likelihood = -outcome.fun
    centred = values - ybar
    return ArmaGarchFit(
        spec=spec,
        mu=float(mu),
        ar=tuple(float(v) for v in ar),
        ma=tuple(float(v) for v in ma),
        omega=omega,
        arch_coef=arch_coef,
        garch_coef=garch_coef,
        log_likelihood=log_likelihood,
        start_log_likelihood=-outcome.start_fun,
        aic=-2.0 * log_likelihood + 2.0 * spec.n_params,
        r_squared=float(1.0 - np.sum(e**2) / np.sum(centred**2)),
        residuals=pd.Series(e, index=index, name="residual"),
        conditional_variance=pd.Series(sigma2, index=index, name="sigma2"),
        standardized_residuals=pd.Series(e / np.sqrt(sigma2), index=index, name="std_residual"),
        convergence=status,
        presample_variance=presample,
        std_errors=errors,
        n_iter=outcome.n_iter,
    )


def _selection_key(f: ArmaGarchFit):
    return (f.aic, f.spec.n_params, f.spec.key)


def select(
    y: Union[pd.Series, np.ndarray],
    grid: Optional[Iterable[ArmaGarchSpec]] = None,
    workers: Optional[int] = None,
) -> ArmaGarchFit:
    """Minimum-AIC fit over ``grid``; ties go to fewer parameters, then (l, m, p, q).

    Fits whose optimizer was still improving when its restart budget ran out
    are not eligible.
    """
    grid = list(grid) if grid is not None else default_grid()
    if not grid:
        raise DataError("the ARMA-GARCH grid is empty")
    workers = workers or settings.workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fits = list(pool.map(lambda spec: fit(y, spec), grid))
    else:
        fits = [fit(y, spec) for spec in grid]

    for f in fits:
        logger.debug("%s: logL %.4f AIC %.4f (%s)", f.spec.label, f.log_likelihood, f.aic, f.convergence.value)
    eligible = [f for f in fits if f.convergence is not Convergence.MAX_ITER]
    if not eligible:
        raise NumericalError(f"no spec in the grid of {len(grid)} converged")
    best = min(eligible, key=_selection_key)
    logger.info("Selected %s (AIC %.3f)", best.spec.label, best.aic)
    return best


def filtered(fit_result: ArmaGarchFit) -> pd.Series:
    """Standardized residuals re-standardized to exact mean 0 and std 1."""
    return standardize(fit_result.standardized_residuals)


def perturbation_check(
    fit_result: ArmaGarchFit, y: Union[pd.Series, np.ndarray], step: float = 1e-4
) -> float:
    """Largest log-likelihood gain from moving one parameter by +/- step.

    Perturbations leaving the admissible region are skipped. A value at
    or below zero means the returned estimate is a local maximum.
    """
    values = np.asarray(y, dtype=float)
    spec = fit_result.spec
    likelihood = _Likelihood(values, spec, fit_result.presample_variance)
    natural = np.array(list(fit_result.params().values()))
    base = -likelihood.natural(natural)
    best_gain = -np.inf
    for k in range(len(natural)):
        for sign in (1.0, -1.0):
            moved = natural.copy()
            moved[k] += sign * step * max(abs(natural[k]), 1.0)
            value = likelihood.natural(moved)
            if value >= PENALTY:
                continue
            best_gain = max(best_gain, -value - base)
    return float(best_gain)


def fit_report(fit_result: ArmaGarchFit) -> pd.DataFrame:
    """Estimates, standard errors and t-statistics in a fit-table layout.

    ``symbol`` carries the conventional labels: the lagged-variance
    coefficient is alpha and the squared-shock coefficient is beta.
    """
    spec = fit_result.spec
    rows = [("mu", "μ", "C", fit_result.mu)]
    rows += [(f"ar{i}", f"φ{i}", f"AR({i})", v) for i, v in enumerate(fit_result.ar, start=1)]
    rows += [(f"ma{j}", f"θ{j}", f"MA({j})", v) for j, v in enumerate(fit_result.ma, start=1)]
    if spec.constant_variance:
        rows.append(("sigma2", "σ²", "Variance", fit_result.omega))
    else:
        rows += [
            ("omega", "ω", "Constant (variance)", fit_result.omega),
            ("arch1", "β1", "ARCH(1)", fit_result.arch_coef),
            ("garch1", "α1", "GARCH(1)", fit_result.garch_coef),
        ]
    records: List[Dict[str, object]] = []
    for name, symbol, label, estimate in rows:
        se = fit_result.std_errors.get(name, float("nan"))
        tstat = estimate / se if se and np.isfinite(se) else float("nan")
        records.append(
            {"parameter": label, "symbol": symbol, "estimate": estimate, "std_error": se, "t_stat": tstat}
        )
    for label, value in (
        ("LogL", fit_result.log_likelihood),
        ("AIC", fit_result.aic),
        ("R²", fit_result.r_squared),
    ):
        records.append({"parameter": label, "symbol": "", "estimate": value, "std_error": np.nan, "t_stat": np.nan})
    frame = pd.DataFrame(records).set_index("parameter")
    frame.attrs["model"] = spec.label
    frame.attrs["convergence"] = fit_result.convergence.value
    return frame
