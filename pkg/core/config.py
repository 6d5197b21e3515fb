import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from core.exceptions import ConfigError
from core.models import ArmaGarchSpec, BacktestConfig, Convention, Frequency, LeverageForm


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="PMG_", env_file=".env", extra="ignore")

    # Output
    output_dir: str = "./reports"
    log_level: str = "INFO"
    seed: int = 7
    workers: int = 1

    # Decomposition
    convention: Convention = Convention.HIGH_EXTREME

    # Descriptive statistics
    acf_lags: List[int] = [1, 2, 3, 6, 12]
    q_lag: int = 12

    # ARMA-GARCH quasi-likelihood
    max_iter: int = 500
    rel_tol: float = 1e-8
    max_restarts: int = 20
    garch_start: float = 0.85
    arch_start: float = 0.05
    omega_start_share: float = 0.1
    boundary_tol: float = 1e-6

    # Granger tests and technical indicators
    granger_lags: List[int] = [2, 4, 6]
    mri_mean_window: int = 360  # months
    mri_vol_window: int = 12  # months
    mri_annualize: bool = True
    h52_window: int = 250  # trading days
    ma_window: int = 200
    skew_window: int = 200

    # VAR forecasting
    var_q_max_monthly: int = 6
    var_q_max_quarterly: int = 4
    leverage: LeverageForm = LeverageForm.SQUARED_SHOCK
    oos_splits_monthly: List[str] = ["1971-01", "1989-01", "1996-01"]
    oos_splits_quarterly: List[str] = ["1971Q1", "1989Q1", "1996Q1"]
    in_sample_windows: List[Tuple[Optional[int], Optional[int]]] = [
        (1950, 1985),
        (1986, 2015),
        (None, None),
    ]

    # Mean-variance backtest
    gamma: float = 3.0
    weight_lower: float = 0.0
    weight_upper: float = 1.5
    zero_variance_tol: float = 1e-12

    def var_q_max(self, frequency: Frequency) -> int:
        if frequency is Frequency.QUARTERLY:
            return self.var_q_max_quarterly
        return self.var_q_max_monthly

    def oos_splits(self, frequency: Frequency) -> List[str]:
        if frequency is Frequency.QUARTERLY:
            return list(self.oos_splits_quarterly)
        return list(self.oos_splits_monthly)

    def design_switches(self) -> Dict[str, Any]:
        """Every modelling choice that changes reported numbers."""
        return {
            "convention": self.convention.value,
            "covariance_divisor": "n",
            "acf_divisor": "n",
            "std_dev_ddof": 1,
            "skew_kurtosis": "moment (biased), kurtosis non-excess",
            "filter_init": "presample residuals 0, presample variance from least-squares ARMA",
            "filtered_series": "standardized residuals re-standardized to mean 0 / std 1",
            "standard_errors": "plain inverse Hessian",
            "leverage": self.leverage.value,
            "oos_benchmark": "expanding mean through t-1",
            "rolling_variance_ddof": 1,
            "risk_free": "TBL / periods per year",
            "mri_vol_annualized": self.mri_annualize,
            "mri_mean_window": self.mri_mean_window,
            "skew_indicator_scale": "standard deviation",
            "gamma": self.gamma,
            "weight_bounds": [self.weight_lower, self.weight_upper],
        }


settings = Settings()


class RunConfig(BaseModel):
    """Declarative description of one command-line run."""

    bars: Optional[Path] = None
    daily_bars: Optional[Path] = None
    predictors: Optional[Path] = None
    sentiment: Optional[Path] = None
    source_frequency: Frequency = Frequency.MONTHLY
    frequency: Frequency = Frequency.MONTHLY
    convention: Convention = settings.convention
    grid: Optional[List[ArmaGarchSpec]] = None
    granger_lags: List[int] = Field(default_factory=lambda: list(settings.granger_lags))
    var_q_max: Optional[int] = None
    oos_splits: Optional[List[str]] = None
    leverage: LeverageForm = settings.leverage
    gamma: float = settings.gamma
    output_dir: Path = Path(settings.output_dir)
    seed: int = settings.seed
    workers: int = settings.workers

    @field_validator("granger_lags")
    @classmethod
    def check_lags(cls, lags: List[int]) -> List[int]:
        if not lags:
            raise ValueError("the Granger lag set must not be empty")
        if any(lag < 1 for lag in lags):
            raise ValueError("Granger lags must be positive")
        return sorted(set(lags))

    @model_validator(mode="after")
    def check_inputs(self) -> "RunConfig":
        for name in ("bars", "daily_bars", "predictors", "sentiment"):
            path = getattr(self, name)
            if path is not None and not path.exists():
                raise ValueError(f"{name} file '{path}' does not exist")
        if self.source_frequency is Frequency.QUARTERLY and self.frequency is Frequency.MONTHLY:
            raise ValueError("cannot build monthly bars from a quarterly file")
        code = self.frequency.period_code
        for split in self.oos_splits or []:
            try:
                pd.Period(split, freq=code)
            except (ValueError, TypeError):
                raise ValueError(f"split date '{split}' does not parse at {self.frequency.value} frequency")
        return self

    @property
    def splits(self) -> List[str]:
        return self.oos_splits or settings.oos_splits(self.frequency)

    @property
    def q_max(self) -> int:
        return self.var_q_max or settings.var_q_max(self.frequency)

    def backtest_config(self) -> BacktestConfig:
        return BacktestConfig.for_frequency(
            self.frequency,
            gamma=self.gamma,
            weight_lower=settings.weight_lower,
            weight_upper=settings.weight_upper,
            zero_variance_tol=settings.zero_variance_tol,
        )

    def fingerprint(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()

    def input_paths(self) -> List[Path]:
        return [p for p in (self.bars, self.daily_bars, self.predictors, self.sentiment) if p is not None]

    @classmethod
    def from_sources(cls, config_file: Optional[Path], overrides: Dict[str, Any]) -> "RunConfig":
        """Merge a JSON config file with flag overrides; flags win."""
        values: Dict[str, Any] = {}
        if config_file is not None:
            try:
                values.update(json.loads(Path(config_file).read_text(encoding="utf-8")))
            except FileNotFoundError:
                raise ConfigError(f"config file '{config_file}' does not exist")
            except (json.JSONDecodeError, UnicodeDecodeError) as e:
                raise ConfigError(f"config file '{config_file}' is not valid JSON: {e}")
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**values)
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
            )
            raise ConfigError(f"invalid run configuration: {problems}")
