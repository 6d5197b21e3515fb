"""Error types raised by the analysis services.

Every error carries the process exit code the command line maps it to,
plus an optional stage label the CLI fills in before reporting.
"""

from typing import Optional


class PmgError(Exception):
    exit_code: int = 1

    def __init__(self, detail: str, stage: Optional[str] = None):
        super().__init__(detail)
        self.detail = detail
        self.stage = stage

    def with_stage(self, stage: str) -> "PmgError":
        if self.stage is None:
            self.stage = stage
        return self

    def __str__(self) -> str:
        if self.stage:
            return f"[{self.stage}] {self.detail}"
        return self.detail


class DataError(PmgError):
    """Input data could not be parsed, validated or aligned."""

    exit_code = 1

    def __init__(
        self,
        detail: str,
        row: Optional[int] = None,
        column: Optional[str] = None,
        stage: Optional[str] = None,
    ):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            detail = f"{detail} ({', '.join(location)})"
        super().__init__(detail, stage)
        self.row = row
        self.column = column


class InsufficientHistoryError(DataError):
    pass


class NumericalError(PmgError):
    exit_code = 2


class SingularDesignError(NumericalError):
    def __init__(self, detail: str, condition_number: float, stage: Optional[str] = None):
        super().__init__(f"{detail} (condition number {condition_number:.3g})", stage)
        self.condition_number = condition_number


class ConfigError(PmgError):
    exit_code = 3
