"""``var`` and ``oos``: VAR forecasts, in-sample horizons and out-of-sample value."""

import argparse
import logging

from cli.options import both_conventions
from cli.pipeline import Pipeline
from core.log import console
from core.models import Frequency
from services import forecast

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("var", parents=[common], help="VAR(q) fit and in-sample return R²")
    parser.add_argument("--leverage", choices=["squared_shock", "as_written"], help="ARCH-in-Mean leverage term")
    parser.set_defaults(handler=run_var)

    parser = subparsers.add_parser("oos", parents=[common], help="static out-of-sample R², Clark-West and backtest")
    parser.set_defaults(handler=run_oos)


def run_var(pipeline: Pipeline, args: argparse.Namespace) -> None:
    both_conventions(args)
    d = pipeline.decomposition()
    writer = pipeline.writer
    leverage = pipeline.config.leverage
    logger.info("ARCH-in-Mean leverage term: %s", leverage.value)

    fit = forecast.fit_var(d.pmg, d.pml, pipeline.config.q_max)
    writer.write_table("table7_var.tsv", forecast.var_report(fit))

    quarterly = pipeline.frequency is Frequency.QUARTERLY
    horizons = forecast.in_sample_table(
        d, q_max=pipeline.config.q_max, constant_variance=quarterly, leverage=leverage
    )
    writer.write_table("table8_in_sample.tsv", horizons)
    writer.write_json(
        "var.json",
        {"q": fit.q, "sic_by_order": fit.sic_by_order, "rsquared": fit.rsquared, "in_sample": horizons},
    )
    console.print(f"✅ VAR({fit.q}) selected by SIC; in-sample table over {horizons.shape[1]} windows")


def run_oos(pipeline: Pipeline, args: argparse.Namespace) -> None:
    both_conventions(args)
    d = pipeline.decomposition()
    writer = pipeline.writer
    results = forecast.evaluate_splits(
        d,
        pipeline.config.splits,
        risk_free=pipeline.risk_free,
        cfg=pipeline.config.backtest_config(),
        q_max=pipeline.config.q_max,
    )
    writer.write_table("table9_oos.tsv", forecast.oos_table(results))

    payload = {}
    for evaluation, report in results:
        label = str(evaluation.split)
        writer.write_csv(f"forecast_{label}.csv", evaluation.forecasts)
        entry = {
            "q": evaluation.q,
            "r2_oos": evaluation.r2_oos,
            "cw_stat": evaluation.cw_stat,
            "cw_pvalue": evaluation.cw_pvalue,
        }
        if report is not None:
            writer.write_csv(f"ledger_{label}.csv", report.ledger)
            entry["backtest"] = report.summary()
        payload[label] = entry
        console.print(
            f"✅ OOS from {label}: R²_OOS {100 * evaluation.r2_oos:.2f}% "
            f"(CW p={evaluation.cw_pvalue:.3f})"
            + (f", CER gain {report.cer_gain:.3f}%" if report is not None else "")
        )
    writer.write_json("oos_summary.json", payload)
