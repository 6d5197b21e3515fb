"""Domain types shared by the services.

Scalar records are validated pydantic models; containers that carry
numpy/pandas data are frozen dataclasses that check their invariants on
construction.
"""

import datetime as dt
from dataclasses import dataclass, field
from enum import Enum
from typing import Annotated, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.exceptions import DataError

PRICE_COLUMNS = ("open", "high", "low", "close")


class Frequency(str, Enum):
    DAILY = "daily"
    MONTHLY = "monthly"
    QUARTERLY = "quarterly"

    @property
    def period_code(self) -> str:
        return {"daily": "D", "monthly": "M", "quarterly": "Q"}[self.value]

    @property
    def periods_per_year(self) -> int:
        return {"daily": 252, "monthly": 12, "quarterly": 4}[self.value]

    @classmethod
    def of_index(cls, index: pd.PeriodIndex) -> "Frequency":
        code = index.freqstr[0]
        for member in cls:
            if member.period_code == code:
                return member
        raise DataError(f"unsupported period frequency '{index.freqstr}'")


class Convention(str, Enum):
    HIGH_EXTREME = "high_extreme"
    LOW_EXTREME = "low_extreme"


class Convergence(str, Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    BOUNDARY = "boundary"


class LeverageForm(str, Enum):
    SQUARED_SHOCK = "squared_shock"
    AS_WRITTEN = "as_written"


# Market data

Price = Annotated[float, Field(gt=0, allow_inf_nan=False)]


class OhlcBar(BaseModel):
    model_config = ConfigDict(frozen=True)

    date: dt.date
    open: Price
    high: Price
    low: Price
    close: Price

    @model_validator(mode="after")
    def check_extremes(self) -> "OhlcBar":
        if self.low > min(self.open, self.close):
            raise ValueError(f"low {self.low} exceeds min(open, close)")
        if self.high < max(self.open, self.close):
            raise ValueError(f"high {self.high} is below max(open, close)")
        return self


@dataclass(frozen=True)
class BarSeries:
    """OHLC observations on a uniform period calendar.

    ``frame`` is indexed by a ``PeriodIndex`` named ``date`` and holds the
    columns open, high, low, close.
    """

    frequency: Frequency
    frame: pd.DataFrame

    def __post_init__(self):
        frame = self.frame
        if not isinstance(frame.index, pd.PeriodIndex):
            raise DataError("bar series must be indexed by periods")
        if frame.index.freqstr[0] != self.frequency.period_code:
            raise DataError(
                f"period index '{frame.index.freqstr}' does not match frequency {self.frequency.value}"
            )
        missing = [c for c in PRICE_COLUMNS if c not in frame.columns]
        if missing:
            raise DataError(f"bar series lacks columns {missing}")
        if frame.index.has_duplicates:
            raise DataError("bar series contains duplicate dates")
        if not frame.index.is_monotonic_increasing:
            raise DataError("bar dates are not strictly increasing")
        prices = frame.loc[:, list(PRICE_COLUMNS)].to_numpy(dtype=float)
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise DataError("bar prices must be finite and positive")
        o, h, l, c = prices.T
        bad = (l > np.minimum(o, c)) | (h < np.maximum(o, c))
        if bad.any():
            first = frame.index[np.argmax(bad)]
            raise DataError(f"OHLC invariant violated at {first}")

    @classmethod
    def from_bars(cls, frequency: Frequency, bars) -> "BarSeries":
        bars = list(bars)
        index = pd.PeriodIndex(
            [pd.Period(b.date, freq=frequency.period_code) for b in bars], name="date"
        )
        frame = pd.DataFrame(
            {c: [getattr(b, c) for b in bars] for c in PRICE_COLUMNS},
            index=index,
            dtype=float,
        )
        return cls(frequency, frame)

    @property
    def bars(self) -> Tuple[OhlcBar, ...]:
        return tuple(
            OhlcBar(date=period.end_time.date(), **row)
            for period, row in zip(self.frame.index, self.frame.to_dict("records"))
        )

    @property
    def dates(self) -> pd.PeriodIndex:
        return self.frame.index

    def __len__(self) -> int:
        return len(self.frame)

    def column(self, name: str) -> pd.Series:
        return self.frame[name]


@dataclass(frozen=True)
class NamedSeries:
    name: str
    values: pd.Series

    @property
    def missing(self) -> int:
        return int(self.values.isna().sum())


@dataclass(frozen=True)
class PredictorSeries(NamedSeries):
    """One column of a wide predictor file, aligned to a bar calendar.

    Missing observations are NaN, never zero.
    """


@dataclass(frozen=True)
class IndicatorSeries(NamedSeries):
    start: Optional[pd.Period] = None
    notes: Tuple[str, ...] = ()

    def __post_init__(self):
        valid = self.values.dropna()
        if self.name == "I_MA" and not valid.isin([0.0, 1.0]).all():
            raise DataError("I_MA must take values in {0, 1}")
        if self.name in ("H52", "Hmax") and ((valid <= 0) | (valid > 1)).any():
            raise DataError(f"{self.name} must lie in (0, 1]")


ControlSeries = Union[PredictorSeries, IndicatorSeries]


# Decomposition


@dataclass(frozen=True)
class DecomposedSeries:
    """Per-period r_full, r, ovr, pmg, pml log returns for one convention."""

    convention: Convention
    frame: pd.DataFrame

    @property
    def r_full(self) -> pd.Series:
        return self.frame["r_full"]

    @property
    def r(self) -> pd.Series:
        return self.frame["r"]

    @property
    def ovr(self) -> pd.Series:
        return self.frame["ovr"]

    @property
    def pmg(self) -> pd.Series:
        return self.frame["pmg"]

    @property
    def pml(self) -> pd.Series:
        return self.frame["pml"]

    def __len__(self) -> int:
        return len(self.frame)


class RegressionSummary(BaseModel):
    slope: float
    intercept: float
    r_squared: float
    n: int


class CovarianceDecomposition(BaseModel):
    lag: int
    cov_pmg_pmg: float
    cov_pml_pml: float
    cov_pmg_pml: float
    cov_pml_pmg: float
    combined: float
    cov_r: float
    n: int


# Descriptive statistics


class SummaryStats(BaseModel):
    mean: float
    std_dev: float = Field(ge=0)
    max: float
    min: float
    skewness: float
    kurtosis: float
    jarque_bera: float = Field(ge=0)
    jb_pvalue: float = Field(ge=0, le=1)
    acf: Dict[int, float]
    ljung_box_q: float = Field(ge=0)
    ljung_box_pvalue: float = Field(ge=0, le=1)
    q_lag: int
    n: int

    @model_validator(mode="after")
    def check_acf(self) -> "SummaryStats":
        if any(abs(v) > 1 + 1e-12 for v in self.acf.values()):
            raise ValueError("autocorrelations must lie in [-1, 1]")
        return self


@dataclass(frozen=True)
class CorrelationMatrix:
    corr: pd.DataFrame
    pvalues: pd.DataFrame
    n: int


# Time-series filtering


class ArmaGarchSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    l: int = Field(ge=0, le=2)
    m: int = Field(ge=0, le=2)
    p: int = Field(default=1, ge=0, le=1)
    q: int = Field(default=1, ge=0, le=1)

    @model_validator(mode="after")
    def check_garch_orders(self) -> "ArmaGarchSpec":
        if self.p != self.q:
            raise ValueError("GARCH orders p and q must both be 0 or both be 1")
        return self

    @property
    def constant_variance(self) -> bool:
        return self.p == 0

    @property
    def n_params(self) -> int:
        return 1 + self.l + self.m + (1 if self.constant_variance else 3)

    @property
    def key(self) -> Tuple[int, int, int, int]:
        return (self.l, self.m, self.p, self.q)

    @property
    def label(self) -> str:
        if self.constant_variance:
            return f"ARMA({self.l},{self.m})"
        return f"ARMA({self.l},{self.m})-GARCH({self.p},{self.q})"


@dataclass(frozen=True)
class ArmaGarchFit:
    """Estimated ARMA-GARCH model.

    ``garch_coef`` multiplies the lagged conditional variance and
    ``arch_coef`` the lagged squared shock. For constant-variance specs
    ``omega`` is the variance itself and both dynamic coefficients are 0.
    """

    spec: ArmaGarchSpec
    mu: float
    ar: Tuple[float, ...]
    ma: Tuple[float, ...]
    omega: float
    arch_coef: float
    garch_coef: float
    log_likelihood: float
    start_log_likelihood: float
    aic: float
    r_squared: float
    residuals: pd.Series
    conditional_variance: pd.Series
    standardized_residuals: pd.Series
    convergence: Convergence
    presample_variance: float
    std_errors: Dict[str, float] = field(default_factory=dict)
    n_iter: int = 0

    def params(self) -> Dict[str, float]:
        out = {"mu": self.mu}
        out.update({f"ar{i}": v for i, v in enumerate(self.ar, start=1)})
        out.update({f"ma{j}": v for j, v in enumerate(self.ma, start=1)})
        if self.spec.constant_variance:
            out["sigma2"] = self.omega
        else:
            out.update(omega=self.omega, arch1=self.arch_coef, garch1=self.garch_coef)
        return out

    @property
    def persistence(self) -> float:
        return self.arch_coef + self.garch_coef


# Inference


class GrangerResult(BaseModel):
    cause: str
    effect: str
    lag: int
    f_stat: float = Field(ge=0)
    p_value: float = Field(ge=0, le=1)
    n_obs: int
    df_num: int
    df_den: int

    @property
    def direction(self) -> str:
        return f"{self.cause} → {self.effect}"


class OlsResult(BaseModel):
    names: Tuple[str, ...]
    params: Dict[str, float]
    tvalues: Dict[str, float]
    pvalues: Dict[str, float]
    r_squared: float
    n_obs: int
    condition_number: float
    dropped_rows: int = 0
    dropped_regressors: Tuple[str, ...] = ()

    def coef(self, name: str) -> float:
        return self.params[name]

    def tstat(self, name: str) -> float:
        return self.tvalues[name]


# Forecasting


@dataclass(frozen=True)
class VarFit:
    """VAR(q) over (pmg, pml), equation by equation.

    ``coefs`` has rows pmg/pml and columns const, L1.pmg, L1.pml, L2.pmg, ...
    ``data`` is the window the model was fitted on, including the lags
    consumed before ``first_target``.
    """

    q: int
    coefs: pd.DataFrame
    data: pd.DataFrame
    first_target: int
    tvalues: Optional[pd.DataFrame] = None
    sigma_u: Optional[np.ndarray] = None
    rsquared: Dict[str, float] = field(default_factory=dict)
    sic: float = float("nan")
    sic_by_order: Dict[int, float] = field(default_factory=dict)
    n_obs: int = 0

    def __post_init__(self):
        expected = (2, 2 * self.q + 1)
        if self.coefs.shape != expected:
            raise DataError(f"VAR({self.q}) coefficient matrix must be {expected}, got {self.coefs.shape}")

    @staticmethod
    def coefficient_names(q: int) -> Tuple[str, ...]:
        names = ["const"]
        for i in range(1, q + 1):
            names += [f"L{i}.pmg", f"L{i}.pml"]
        return tuple(names)


@dataclass(frozen=True)
class ArchInMeanFit:
    delta: Tuple[float, float, float]
    omega: Tuple[float, float, float, float]
    log_likelihood: float
    r_squared: float
    constant_variance: bool
    leverage: LeverageForm
    convergence: Convergence
    conditional_volatility: pd.Series
    fitted: pd.Series
    std_errors: Dict[str, float] = field(default_factory=dict)

    def tstat(self, name: str) -> float:
        values = {"delta0": self.delta[0], "delta1": self.delta[1], "delta2": self.delta[2]}
        se = self.std_errors.get(name, float("nan"))
        return values[name] / se if se and np.isfinite(se) else float("nan")


@dataclass(frozen=True)
class OosEvaluation:
    """Static out-of-sample evaluation.

    ``forecasts`` is indexed by the evaluation periods with columns
    r, r_mean (expanding historical mean through t-1) and r_var_forecast.
    """

    split: pd.Period
    split_index: int
    q: int
    forecasts: pd.DataFrame
    r2_oos: float
    cw_stat: float
    cw_pvalue: float
    var_fit: Optional[VarFit] = None

    def __post_init__(self):
        if self.r2_oos > 1 + 1e-12:
            raise DataError("out-of-sample R² cannot exceed 1")
        if not 0.0 <= self.cw_pvalue <= 1.0:
            raise DataError("Clark-West p-value outside [0, 1]")


# Portfolio


class BacktestConfig(BaseModel):
    gamma: float = Field(default=3.0, gt=0)
    weight_lower: float = 0.0
    weight_upper: float = 1.5
    variance_window: int = Field(default=120, gt=1)
    annualization: float = Field(default=1200.0, gt=0)
    zero_variance_tol: float = 1e-12

    @model_validator(mode="after")
    def check_bounds(self) -> "BacktestConfig":
        if self.weight_lower >= self.weight_upper:
            raise ValueError("weight_lower must be below weight_upper")
        return self

    @classmethod
    def for_frequency(cls, frequency: Frequency, **overrides) -> "BacktestConfig":
        # ten years of history, annualized percentage units
        periods = frequency.periods_per_year
        defaults = {"variance_window": 10 * periods, "annualization": 100.0 * periods}
        defaults.update(overrides)
        return cls(**defaults)


@dataclass(frozen=True)
class BacktestReport:
    ledger: pd.DataFrame
    nu_bench: float
    nu_model: float
    cer_gain: float
    sharpe_model: float
    sharpe_bench: float
    sharpe_buy_hold: float
    clamped_bench: int
    clamped_model: int
    gamma: float
    annualization: float
    degenerate_windows: int = 0

    def summary(self) -> Dict[str, float]:
        return {
            "nu_bench": self.nu_bench,
            "nu_model": self.nu_model,
            "cer_gain": self.cer_gain,
            "sharpe_model": self.sharpe_model,
            "sharpe_bench": self.sharpe_bench,
            "sharpe_buy_hold": self.sharpe_buy_hold,
            "clamped_bench": self.clamped_bench,
            "clamped_model": self.clamped_model,
            "gamma": self.gamma,
            "annualization": self.annualization,
            "degenerate_windows": self.degenerate_windows,
        }
