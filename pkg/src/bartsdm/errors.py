"""Exception types shared across the package."""


class BartSdmError(Exception):
    """Base class for all package errors."""


class GridFormatError(BartSdmError):
    """Malformed ASCII grid file. Carries the offending line number."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class AlignmentError(BartSdmError):
    """Raster layers do not share the same grid geometry."""


class DegenerateVariableError(BartSdmError):
    """A variable has zero variance and cannot be standardized."""


class EmptyDataError(BartSdmError):
    """No records survived cleaning / selection."""


class InfeasibleSamplingError(BartSdmError):
    """Not enough candidate cells to place the requested pseudo-absences."""


class ClassImbalanceError(BartSdmError):
    """Response contains a single class."""


class ValidationError(BartSdmError):
    """Invalid input values (non-finite covariates, bad parameters...)."""


class SchemaError(BartSdmError):
    """Covariate/column schema mismatch between model and data."""


class MetricUndefinedError(BartSdmError):
    """A classification metric is undefined for the given input."""


class StratificationError(BartSdmError):
    """A class has too few rows for the requested number of CV folds."""


class ParameterError(BartSdmError):
    """Out-of-range argument."""
