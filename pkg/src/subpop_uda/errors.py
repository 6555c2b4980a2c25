"""Exception hierarchy. Each error carries the CLI exit code it maps to."""


class UDAError(Exception):
    exit_code = 1


class ConfigError(UDAError, ValueError):
    exit_code = 1


class DataError(UDAError, ValueError):
    exit_code = 2


class ParseError(DataError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class EmptyDatasetError(DataError):
    pass


class DimensionError(DataError):
    pass


class StructuredMissingnessError(DataError):
    """A source row falls in the (y=1, a=1) cell that must be empty."""

    def __init__(self, rows):
        self.rows = list(rows)
        shown = ", ".join(str(i) for i in self.rows[:20])
        more = "" if len(self.rows) <= 20 else f" (+{len(self.rows) - 20} more)"
        super().__init__(
            f"{len(self.rows)} source row(s) with y=1, a=1: {shown}{more}"
        )


class EstimationError(UDAError):
    exit_code = 3


class FitError(EstimationError):
    """Logistic fit could not be carried out (e.g. a single class)."""

    def __init__(self, message, model=None):
        self.model = model
        if model is not None:
            message = f"{model}: {message}"
        super().__init__(message)


class IdentifiabilityError(EstimationError):
    pass


class NumericError(EstimationError, ArithmeticError):
    pass
