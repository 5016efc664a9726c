"""Exception types shared across the toolkit."""


class FlucastError(Exception):
    """Base class for all toolkit errors."""


class CsvFormatError(FlucastError, ValueError):
    """A data file row could not be parsed; message carries the line number."""


class CalendarError(FlucastError, ValueError):
    """Series calendar is not strictly increasing or a week number is invalid."""


class InsufficientDataError(FlucastError, ValueError):
    """Too few observations for the requested embedding, split, or fold scheme."""


class DomainError(FlucastError, ValueError):
    """An input value lies outside the mathematical domain of the operation."""


class DimensionError(FlucastError, ValueError):
    """Vector or matrix dimensions do not match the trained model or codec."""


class TrainingError(FlucastError, RuntimeError):
    """Model training failed (non-finite loss, unsolvable linear system, ...)."""


class ConfigError(FlucastError, ValueError):
    """Experiment configuration is invalid or inconsistent."""
