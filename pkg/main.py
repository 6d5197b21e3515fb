import argparse
import sys
from typing import List, Optional

from dotenv import load_dotenv

# Load environment variables before settings are read
load_dotenv()

from cli.commands import COMMANDS  # noqa: E402
from cli.options import common_parser, overrides_from  # noqa: E402
from cli.pipeline import Pipeline  # noqa: E402
from core.config import RunConfig, settings  # noqa: E402
from core.exceptions import PmgError  # noqa: E402
from core.log import configure_logging, console  # noqa: E402


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmg",
        description="Decompose returns into potential maximum gain and loss, and measure their asymmetry",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    common = common_parser()
    for module in COMMANDS:
        module.register(subparsers, common)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging("DEBUG" if args.verbose else settings.log_level)
    try:
        config = RunConfig.from_sources(args.config, overrides_from(args))
        args.handler(Pipeline(config), args)
    except PmgError as e:
        e.with_stage(args.command)
        console.print(f"❌ {e}")
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
