import logging

from rich.console import Console
from rich.logging import RichHandler

console = Console()

_configured = False


def configure_logging(level: str = "INFO") -> None:
    """Route stdlib logging through rich once per process."""
    global _configured
    if _configured:
        logging.getLogger().setLevel(level.upper())
        return
    logging.basicConfig(
        level=level.upper(),
        format="%(name)s: %(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=False)],
    )
    _configured = True
