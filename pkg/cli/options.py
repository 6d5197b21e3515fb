"""Arguments shared by every subcommand and their mapping onto RunConfig."""

import argparse
from pathlib import Path
from typing import Any, Dict, List

from core.exceptions import ConfigError

BOTH_CONVENTIONS = "both"


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _str_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _grid(text: str) -> List[Dict[str, int]]:
    """``l,m,p,q`` specs separated by semicolons, e.g. ``1,1,1,1;2,2,0,0``."""
    specs = []
    for chunk in text.split(";"):
        orders = _int_list(chunk)
        if len(orders) != 4:
            raise argparse.ArgumentTypeError(f"grid entry '{chunk}' must be l,m,p,q")
        specs.append(dict(zip("lmpq", orders)))
    return specs


def common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("run configuration")
    group.add_argument("--config", type=Path, help="JSON run configuration; flags override it")
    group.add_argument("--bars", type=Path, help="OHLC bar file (date,open,high,low,close)")
    group.add_argument("--daily-bars", type=Path, help="daily OHLC file for technical indicators")
    group.add_argument("--predictors", type=Path, help="wide predictor file (first column = date)")
    group.add_argument("--sentiment", type=Path, help="wide sentiment file (first column = date)")
    group.add_argument("--source-frequency", choices=["daily", "monthly", "quarterly"])
    group.add_argument("--frequency", choices=["daily", "monthly", "quarterly"])
    group.add_argument("--convention", choices=["high_extreme", "low_extreme", BOTH_CONVENTIONS])
    group.add_argument("--grid", type=_grid, help="ARMA-GARCH specs l,m,p,q;l,m,p,q")
    group.add_argument("--lags", type=_int_list, help="Granger lags, e.g. 2,4,6")
    group.add_argument("--var-q-max", type=int)
    group.add_argument("--splits", type=_str_list, help="OOS split dates, e.g. 1971-01,1989-01")
    group.add_argument("--gamma", type=float, help="relative risk aversion")
    group.add_argument("--output-dir", type=Path)
    group.add_argument("--seed", type=int)
    group.add_argument("--workers", type=int)
    group.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def overrides_from(args: argparse.Namespace) -> Dict[str, Any]:
    convention = getattr(args, "convention", None)
    return {
        "bars": getattr(args, "bars", None),
        "daily_bars": getattr(args, "daily_bars", None),
        "predictors": getattr(args, "predictors", None),
        "sentiment": getattr(args, "sentiment", None),
        "source_frequency": getattr(args, "source_frequency", None),
        "frequency": getattr(args, "frequency", None),
        "convention": None if convention == BOTH_CONVENTIONS else convention,
        "grid": getattr(args, "grid", None),
        "granger_lags": getattr(args, "lags", None),
        "var_q_max": getattr(args, "var_q_max", None),
        "oos_splits": getattr(args, "splits", None),
        "leverage": getattr(args, "leverage", None),
        "gamma": getattr(args, "gamma", None),
        "output_dir": getattr(args, "output_dir", None),
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
    }


def both_conventions(args: argparse.Namespace, allowed: bool = False) -> bool:
    requested = getattr(args, "convention", None) == BOTH_CONVENTIONS
    if requested and not allowed:
        raise ConfigError(f"--convention {BOTH_CONVENTIONS} is only supported by the granger subcommand")
    return requested
