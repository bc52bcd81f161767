"""Exception hierarchy shared by every xcreg module."""


class XcregError(Exception):
    """Base class for all library errors."""


class OutOfDomain(XcregError, ValueError):
    pass


class NonFinite(XcregError, ValueError):
    pass


class DegenerateWindow(XcregError, ValueError):
    pass


class ZeroArea(XcregError, ValueError):
    pass


class GridMismatch(XcregError, ValueError):
    pass


class ShiftOutOfRange(XcregError, ValueError):
    pass


class RangeDegenerate(XcregError, ValueError):
    pass


class NoMinimum(XcregError, RuntimeError):
    pass


class InsufficientData(XcregError, ValueError):
    pass


class EmptyInput(XcregError, ValueError):
    pass


class ConfigError(XcregError, ValueError):
    """Malformed or unknown configuration entry."""


class ParseError(XcregError, ValueError):
    """Input file that cannot be read as the expected format."""
