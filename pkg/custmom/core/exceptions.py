"""
# Exceptions

Every failure the engine can surface to the command line derives from
`CustmomError`. Each subclass carries the process exit code and a short
machine-readable `code` that `custmom.pipeline` writes into `error.json`.
"""
from typing import Optional


class CustmomError(Exception):
    """Base class for engine failures."""

    exit_code: int = 1
    code: str = "engine_error"

    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> dict:
        return {"code": self.code, "exit_code": self.exit_code,
                "message": self.message, "details": self.details}


class ConfigError(CustmomError):
    exit_code = 2
    code = "config_error"


class SchemaError(CustmomError):
    """A mapped column is missing or a file header cannot be interpreted."""

    exit_code = 3
    code = "schema_mismatch"


class DuplicateObservationError(CustmomError):
    exit_code = 4
    code = "duplicate_observation"


class MissingFactorError(CustmomError):
    exit_code = 5
    code = "missing_factor"

    def __init__(self, missing: list[str]):
        super().__init__(f"factor series missing: {', '.join(missing)}", {"missing": list(missing)})
        self.missing = list(missing)


class DegenerateBreakpointsError(CustmomError):
    exit_code = 6
    code = "degenerate_breakpoints"


class EstimationError(CustmomError):
    exit_code = 7
    code = "estimation_error"


class CollinearityError(EstimationError):
    def __init__(self, columns: list[str]):
        super().__init__(f"regressor matrix is rank deficient; collinear columns: {', '.join(columns)}",
                         {"columns": list(columns)})
        self.columns = list(columns)


class InsufficientObservationsError(EstimationError):
    pass


class SyntheticGenerationError(CustmomError):
    exit_code = 8
    code = "synthetic_generation"
