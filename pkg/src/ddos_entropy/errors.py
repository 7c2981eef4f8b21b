"""Exception hierarchy shared by every stage of the detector."""


class DetectorError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DetectorError, ValueError):
    """An invalid parameter or configuration value."""


class ParseError(DetectorError, ValueError):
    """A trace line could not be turned into a flow record."""

    def __init__(self, message, line=None, field=None, line_number=None):
        self.line = line
        self.field = field
        self.line_number = line_number
        where = f"line {line_number}" if line_number is not None else "line"
        detail = f"{where}: {message}"
        if field is not None:
            detail += f" (field {field!r})"
        if line is not None:
            detail += f": {line!r}"
        super().__init__(detail)


class OrderingError(DetectorError, ValueError):
    """Input that must be sorted by timestamp was not."""

    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class InsufficientDataError(DetectorError, ValueError):
    """Too little data for a meaningful estimate."""


class NoDominantFlowError(DetectorError, ValueError):
    """A dominant flow was requested from an empty window."""


class CalibrationError(DetectorError, ValueError):
    """A threshold or baseline could not be derived."""


class EvaluationError(DetectorError, ValueError):
    """Labels and detector output do not line up."""


class AlertSinkError(DetectorError, OSError):
    """Writing to the alert log failed; the run must abort."""
