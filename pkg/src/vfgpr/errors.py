"""Exception types raised across the package."""


class VfgprError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(VfgprError, ValueError):
    pass


class NotPositiveDefinite(VfgprError, ArithmeticError):
    pass


class DegenerateDiagonal(VfgprError, ArithmeticError):
    pass


class AllStartsFailed(VfgprError, RuntimeError):
    """Every optimizer restart failed to factor the covariance matrix."""


class SubsampleTooLarge(VfgprError, ValueError):
    pass


class DegenerateTestSample(VfgprError, ValueError):
    """Test responses are all identical so RRMS is undefined."""


class OracleFailure(VfgprError, RuntimeError):
    """A low-fidelity oracle call failed; ``point`` holds the query."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ParseError(VfgprError, ValueError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f"line {line}"
            if column is not None:
                loc += f", column {column}"
            loc += ": "
        super().__init__(loc + message)
        self.line = line
        self.column = column
