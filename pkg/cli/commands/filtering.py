"""``fit`` and ``granger``: ARMA-GARCH filtering and causality tables."""

import argparse
from typing import Dict, List

import pandas as pd

from cli.options import both_conventions
from cli.pipeline import Pipeline
from core.log import console
from core.models import Convention, Convergence
from services import desc_stats, inference, ts_filter

GRANGER_TABLES = {
    Convention.HIGH_EXTREME: "table5_granger_high.tsv",
    Convention.LOW_EXTREME: "table6_granger_low.tsv",
}


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("fit", parents=[common], help="ARMA-GARCH filters and filtered-series statistics")
    parser.set_defaults(handler=run_fit)

    parser = subparsers.add_parser("granger", parents=[common], help="Granger causality between PMG and PML")
    shown = parser.add_mutually_exclusive_group()
    shown.add_argument("--filtered", action="store_true", help="filtered series only")
    shown.add_argument("--raw", action="store_true", help="unfiltered series only")
    parser.set_defaults(handler=run_granger)


def fit_table(pipeline: Pipeline) -> pd.DataFrame:
    reports = {}
    for component in ("pmg", "pml"):
        fitted = pipeline.filter_fit(component)
        report = ts_filter.fit_report(fitted)
        reports[f"{component.upper()} {fitted.spec.label}"] = report
    table = pd.concat(reports, axis=1, sort=False)
    table.columns = [f"{model}:{stat}" for model, stat in table.columns]
    return table


def run_fit(pipeline: Pipeline, args: argparse.Namespace) -> None:
    both_conventions(args)
    writer = pipeline.writer
    writer.write_table("table3_fits.tsv", fit_table(pipeline))

    filtered = pipeline.filtered()
    summary = desc_stats.summary_table({"PMG^F": filtered["pmg"], "PML^F": filtered["pml"]})
    writer.write_table("table4_filtered_summary.tsv", summary)

    rows = {
        "PMG^F on PML^F(t-1)": inference.impact_regression(filtered["pmg"], filtered["pml"], 1),
        "PML^F on PMG^F(t-1)": inference.impact_regression(filtered["pml"], filtered["pmg"], 1),
    }
    impact = pd.DataFrame(
        {
            label: {
                "slope": result.params[result.names[1]],
                "t_stat": result.tvalues[result.names[1]],
                "p_value": result.pvalues[result.names[1]],
                "R²": result.r_squared,
                "N": result.n_obs,
            }
            for label, result in rows.items()
        }
    ).T
    writer.write_table("impact_regressions.tsv", impact)
    summaries = {}
    for component in ("pmg", "pml"):
        fitted = pipeline.filter_fit(component)
        summaries[component] = {
            "spec": fitted.spec,
            "params": fitted.params(),
            "std_errors": fitted.std_errors,
            "aic": fitted.aic,
            "log_likelihood": fitted.log_likelihood,
            "convergence": fitted.convergence,
        }
        marker = "✅" if fitted.convergence is Convergence.CONVERGED else "⚠️"
        console.print(f"{marker} {component.upper()}: {fitted.spec.label}, AIC {fitted.aic:.2f} ({fitted.convergence.value})")
    writer.write_json("fits.json", summaries)


def granger_rows(pipeline: Pipeline, convention: Convention, lags: List[int], raw: bool, filtered: bool) -> pd.DataFrame:
    panels: Dict[str, pd.DataFrame] = {}
    if raw:
        d = pipeline.decomposition(convention)
        panels["raw"] = inference.granger_table({"PML": d.pml, "PMG": d.pmg}, lags)
    if filtered:
        f = pipeline.filtered(convention)
        panels["filtered"] = inference.granger_table({"PML^F": f["pml"], "PMG^F": f["pmg"]}, lags)
    table = pd.concat(panels.values())
    table.index = [f"{kind}: {direction}" for kind, panel in panels.items() for direction in panel.index]
    table.index.name = "direction"
    return table


def run_granger(pipeline: Pipeline, args: argparse.Namespace) -> None:
    conventions = list(Convention) if both_conventions(args, allowed=True) else [pipeline.config.convention]
    raw = not getattr(args, "filtered", False)
    filtered = not getattr(args, "raw", False)
    lags = pipeline.config.granger_lags
    for convention in conventions:
        table = granger_rows(pipeline, convention, lags, raw, filtered)
        pipeline.writer.write_table(GRANGER_TABLES[convention], table)
        pvalues = table[[f"p({lag})" for lag in lags]]
        console.print(f"✅ Granger ({convention.value}) p-values at lags {lags}:")
        console.print(pvalues.round(4).to_string())
