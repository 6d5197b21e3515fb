"""``decompose`` and ``describe``: return decomposition and descriptive tables."""

import argparse

import pandas as pd

from cli.options import both_conventions
from cli.pipeline import Pipeline
from core.log import console
from services import decompose, desc_stats


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("decompose", parents=[common], help="split returns into OVR, PMG and PML")
    parser.set_defaults(handler=run_decompose)

    parser = subparsers.add_parser("describe", parents=[common], help="summary statistics and correlations")
    parser.set_defaults(handler=run_describe)


def run_decompose(pipeline: Pipeline, args: argparse.Namespace) -> None:
    both_conventions(args)
    d = pipeline.decomposition()
    writer = pipeline.writer
    writer.track(decompose.write_decomposed(d, writer.output_dir / "decomposed.csv", writer.header_lines()))

    if len(d) < 8:
        console.print(f"⚠️ Only {len(d)} periods; overnight regression and covariance table skipped")
        console.print(f"✅ Decomposed {len(d)} {pipeline.frequency.value} periods")
        return
    share = decompose.overnight_share(d)
    writer.write_json("overnight_share.json", share)
    writer.write_table("covariance_decomposition.tsv", decompose.covariance_table(d))
    console.print(
        f"✅ Decomposed {len(d)} {pipeline.frequency.value} periods "
        f"(r_full on r: slope {share.slope:.3f}, R² {share.r_squared:.3f})"
    )


def run_describe(pipeline: Pipeline, args: argparse.Namespace) -> None:
    both_conventions(args)
    d = pipeline.decomposition()
    writer = pipeline.writer
    columns = {"r_full": d.r_full, "r": d.r, "OVR": d.ovr, "PMG": d.pmg, "PML": d.pml}
    table = desc_stats.summary_table(columns)
    writer.write_table("table1_summary.tsv", table)

    corr = desc_stats.correlation_matrix({"r": d.r, "PMG": d.pmg, "PML": d.pml})
    combined = pd.concat({"corr": corr.corr, "p_value": corr.pvalues}, axis=1)
    combined.columns = [f"{stat}:{name}" for stat, name in combined.columns]
    writer.write_table("table2_correlation.tsv", combined)
    writer.write_json("describe.json", {"summary": table, "correlation": corr.corr, "p_values": corr.pvalues})
    console.print(
        f"✅ PMG/PML correlation {corr.corr.loc['PMG', 'PML']:.3f} "
        f"(p={corr.pvalues.loc['PMG', 'PML']:.4f}, n={corr.n})"
    )
