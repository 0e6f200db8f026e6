"""Exception hierarchy shared by every vidmem module."""


class VidmemError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(VidmemError, ValueError):
    """Shapes of operands do not agree."""


class ParameterError(VidmemError, ValueError):
    """A hyperparameter or argument is outside its valid range."""


class ConfigError(VidmemError, ValueError):
    """An inconsistent model or run configuration."""


class DomainError(VidmemError, ValueError):
    """An input lies outside the domain an operation is defined on."""


class UndefinedMetricError(DomainError):
    """A metric is undefined for the given input (too short, constant)."""


class DegenerateDataError(DomainError):
    """No candidate produced a defined result."""


class NumericError(VidmemError, ArithmeticError):
    """A non-finite value appeared where finite values are required."""


class ContractError(VidmemError, RuntimeError):
    """An API was called in a way its contract forbids."""


class SchemaError(VidmemError, ValueError):
    """Ingested data does not conform to the expected layout."""


class ParseError(SchemaError):
    """A data file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class RangeError(SchemaError):
    """A field value lies outside its allowed range."""
