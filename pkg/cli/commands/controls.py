"""``controls``: does PML still predict PMG once other predictors are controlled?"""

import argparse
import logging
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from cli.options import both_conventions
from cli.pipeline import Pipeline
from core.exceptions import ConfigError
from core.log import console
from core.models import ControlSeries, Frequency, IndicatorSeries, OlsResult
from services import desc_stats, inference

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("controls", parents=[common], help="control regressions with predictors and indicators")
    parser.set_defaults(handler=run_controls)


def _row(result: OlsResult) -> Dict[str, float]:
    row: Dict[str, float] = {}
    for name in result.names[1:]:
        row[name] = result.params[name]
        row[f"t({name})"] = result.tvalues[name]
    row["R²"] = result.r_squared
    row["N"] = result.n_obs
    row["dropped_rows"] = result.dropped_rows
    return row


def regression_table(
    pmg_f: pd.Series, pml_f: pd.Series, groups: Dict[str, Sequence[ControlSeries]]
) -> pd.DataFrame:
    """Benchmark row, then each control group with controls at t and at t and t+1."""
    rows = {"benchmark": _row(inference.control_regression(pmg_f, pml_f))}
    for label, controls in groups.items():
        rows[f"{label} (t)"] = _row(inference.control_regression(pmg_f, pml_f, controls))
        rows[f"{label} (t, t+1)"] = _row(
            inference.control_regression(pmg_f, pml_f, controls, include_contemporaneous=True)
        )
    table = pd.DataFrame.from_dict(rows, orient="index")
    table.index.name = "controls"
    return table


def correlation_table(d, predictors: Sequence[ControlSeries]) -> pd.DataFrame:
    frame = pd.DataFrame({"PML": d.pml, "PMG": d.pmg})
    for predictor in predictors:
        values = predictor.values.reindex(frame.index)
        if values.notna().sum() < 3 or np.ptp(values.dropna()) == 0:
            logger.warning("⚠️ Predictor %s has too little variation for correlations; skipped", predictor.name)
            continue
        frame[predictor.name] = values
    complete = frame.dropna()
    if len(complete) < len(frame):
        logger.info("Correlation table uses %d complete periods of %d", len(complete), len(frame))
    corr = desc_stats.correlation_matrix({name: complete[name] for name in complete.columns})
    combined = pd.concat({"corr": corr.corr, "p_value": corr.pvalues}, axis=1)
    combined.columns = [f"{stat}:{name}" for stat, name in combined.columns]
    return combined


def _by_name(indicators: List[IndicatorSeries]) -> Dict[str, IndicatorSeries]:
    return {indicator.name: indicator for indicator in indicators}


def run_controls(pipeline: Pipeline, args: argparse.Namespace) -> None:
    both_conventions(args)
    config = pipeline.config
    if config.predictors is None and config.daily_bars is None and config.sentiment is None:
        raise ConfigError("controls needs --predictors, --daily-bars or --sentiment")
    d = pipeline.decomposition()
    filtered = pipeline.filtered()
    pmg_f, pml_f = filtered["pmg"], filtered["pml"]
    writer = pipeline.writer
    monthly = pipeline.frequency is not Frequency.QUARTERLY

    if config.predictors is not None:
        predictors = pipeline.predictors
        writer.write_table(f"table{10 if monthly else 11}_correlations.tsv", correlation_table(d, predictors))
        groups = {p.name: [p] for p in predictors}
        table = regression_table(pmg_f, pml_f, groups)
        writer.write_table(f"table{12 if monthly else 13}_macro_controls.tsv", table)
        console.print(f"✅ Macro controls: {len(groups)} predictors")

    indicators = _by_name(pipeline.indicators)
    if indicators:
        writer.write_csv("indicators.csv", inference.indicator_frame(indicators.values()))
        state = inference.state_dependent_controls(indicators["I_MA"], indicators["MRI"])
        table = regression_table(pmg_f, pml_f, {"I_MA·MRI, (1-I_MA)·MRI": state})
        returns = inference.indicator_return_regression(d.r, state)
        table.loc["r(t+1) on state MRI"] = pd.Series(_row(returns))
        writer.write_table("table14_state_dependent.tsv", table)

        levels = {
            "H52": [indicators["H52"]],
            "Hmax": [indicators["Hmax"]],
            "H52, Hmax": [indicators["H52"], indicators["Hmax"]],
        }
        writer.write_table("table15_price_levels.tsv", regression_table(pmg_f, pml_f, levels))
        writer.write_table("table17_skewness.tsv", regression_table(pmg_f, pml_f, {"SK": [indicators["SK"]]}))
        for indicator in indicators.values():
            if indicator.notes:
                console.print(f"⚠️ {indicator.name}: {'; '.join(indicator.notes)}")
        console.print(f"✅ Technical indicators: {', '.join(indicators)}")

    if pipeline.sentiment:
        groups = {s.name: [s] for s in pipeline.sentiment}
        writer.write_table("table16_sentiment.tsv", regression_table(pmg_f, pml_f, groups))
        console.print(f"✅ Sentiment controls: {len(groups)} series")
