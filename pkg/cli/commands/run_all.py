"""``all``: every report the inputs allow, sharing one pipeline."""

import argparse

from cli.commands import controls, data, filtering, forecasting
from cli.options import both_conventions
from cli.pipeline import Pipeline
from core.exceptions import PmgError
from core.log import console


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("all", parents=[common], help="run the full pipeline")
    parser.set_defaults(handler=run_all, filtered=False, raw=False, leverage=None)


def run_all(pipeline: Pipeline, args: argparse.Namespace) -> None:
    both_conventions(args)
    steps = [
        ("decompose", data.run_decompose),
        ("describe", data.run_describe),
        ("fit", filtering.run_fit),
        ("granger", filtering.run_granger),
        ("var", forecasting.run_var),
        ("oos", forecasting.run_oos),
    ]
    config = pipeline.config
    if config.predictors is not None or config.daily_bars is not None or config.sentiment is not None:
        steps.append(("controls", controls.run_controls))
    else:
        console.print("⚠️ No predictor, daily or sentiment file; control regressions skipped")

    for name, step in steps:
        console.rule(name)
        try:
            step(pipeline, args)
        except PmgError as e:
            e.with_stage(name)
            raise
    console.print(f"✅ {len(pipeline.writer.written)} report files in {pipeline.writer.output_dir}")
