"""Shared, lazily-built state for one command-line run.

Each stage is computed on first use and cached, so ``all`` fits the
ARMA-GARCH filters once even though several subcommands consume them.
"""

import logging
from functools import cached_property
from typing import Dict, List, Optional

import pandas as pd

from core.config import RunConfig
from core.exceptions import ConfigError
from core.models import (
    ArmaGarchFit,
    BarSeries,
    Convention,
    DecomposedSeries,
    Frequency,
    IndicatorSeries,
    PredictorSeries,
)
from services import decompose, inference, market_data, portfolio, reports, ts_filter

logger = logging.getLogger(__name__)


class Pipeline:
    def __init__(self, config: RunConfig):
        self.config = config
        self._decomposed: Dict[Convention, DecomposedSeries] = {}
        self._fits: Dict[tuple, ArmaGarchFit] = {}

    @property
    def frequency(self) -> Frequency:
        return self.config.frequency

    @cached_property
    def bars(self) -> BarSeries:
        config = self.config
        if config.bars is None:
            raise ConfigError("this subcommand needs --bars")
        series = market_data.load_bars(config.bars, config.source_frequency)
        if config.source_frequency is config.frequency:
            return series
        if config.source_frequency is Frequency.MONTHLY and config.frequency is Frequency.QUARTERLY:
            return market_data.to_quarterly(series)
        raise ConfigError(
            f"cannot build {config.frequency.value} bars from a {config.source_frequency.value} file"
        )

    def decomposition(self, convention: Optional[Convention] = None) -> DecomposedSeries:
        convention = Convention(convention or self.config.convention)
        if convention not in self._decomposed:
            self._decomposed[convention] = decompose.decompose(self.bars, convention)
        return self._decomposed[convention]

    def filter_fit(self, component: str, convention: Optional[Convention] = None) -> ArmaGarchFit:
        """AIC-selected ARMA-GARCH fit of the square-root PMG or PML series."""
        convention = Convention(convention or self.config.convention)
        key = (component, convention)
        if key not in self._fits:
            d = self.decomposition(convention)
            y = ts_filter.sqrt_transform(d.frame[component])
            logger.info("Fitting ARMA-GARCH grid to √%s (%s)", component.upper(), convention.value)
            self._fits[key] = ts_filter.select(y, self.config.grid, self.config.workers)
        return self._fits[key]

    def filtered(self, convention: Optional[Convention] = None) -> pd.DataFrame:
        """Filtered PMG^F and PML^F on the decomposition calendar."""
        return pd.DataFrame(
            {
                "pmg": ts_filter.filtered(self.filter_fit("pmg", convention)).rename("pmg"),
                "pml": ts_filter.filtered(self.filter_fit("pml", convention)).rename("pml"),
            }
        )

    @cached_property
    def predictors(self) -> List[PredictorSeries]:
        if self.config.predictors is None:
            raise ConfigError("this subcommand needs --predictors")
        return market_data.load_predictors(self.config.predictors, self.bars)

    @cached_property
    def sentiment(self) -> List[PredictorSeries]:
        if self.config.sentiment is None:
            return []
        return market_data.load_predictors(self.config.sentiment, self.bars)

    @cached_property
    def daily(self) -> Optional[BarSeries]:
        if self.config.daily_bars is None:
            return None
        return market_data.load_bars(self.config.daily_bars, Frequency.DAILY)

    @cached_property
    def indicators(self) -> List[IndicatorSeries]:
        if self.daily is None:
            return []
        return inference.build_indicators(self.daily, self.decomposition().frame.index)

    @cached_property
    def risk_free(self) -> Optional[pd.Series]:
        if self.config.predictors is None:
            logger.warning("⚠️ No predictor file; the portfolio backtest needs its TBL column and is skipped")
            return None
        tbl = market_data.predictor_by_name(self.predictors, "tbl")
        return portfolio.risk_free_from_tbl(tbl, self.frequency)

    @cached_property
    def writer(self) -> reports.ReportWriter:
        return reports.ReportWriter(self.config.output_dir, reports.build_header(self.config))
