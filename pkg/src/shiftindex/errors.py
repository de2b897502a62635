"""Exception hierarchy shared by all modules."""


class ShiftIndexError(Exception):
    """Base class for every error raised by the package."""


class UnsupportedGeometry(ShiftIndexError):
    pass


class BadResolution(UnsupportedGeometry, ValueError):
    pass


class DegreeMismatch(ShiftIndexError):
    pass


class GroupMismatch(ShiftIndexError):
    pass


class AlgebraMismatch(ShiftIndexError):
    pass


class TopDegree(ShiftIndexError):
    pass


class InsufficientSupport(ShiftIndexError):
    pass


class NotElliptic(ShiftIndexError):
    """The symbol admits no inverse in the crossed product.

    ``diagnostics`` carries the smallest singular values of the orbit
    sections at the radii that were tried.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TruncationInsufficient(ShiftIndexError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UnsupportedTerm(ShiftIndexError):
    pass


class NoPlateau(ShiftIndexError):
    """No stable integer reading across the truncation schedule.

    ``closing_gap`` is True when the spectral gap shrinks as the truncation
    grows, which is the signature of a non-elliptic operator.
    """

    def __init__(self, message, readings=None, closing_gap=False):
        super().__init__(message)
        self.readings = readings or []
        self.closing_gap = closing_gap


class EmptyStratum(ShiftIndexError):
    pass


class VanishingAngle(ShiftIndexError):
    pass


class NotIdempotent(ShiftIndexError):
    pass


class NonConvergent(ShiftIndexError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ScenarioInvalid(ShiftIndexError):
    def __init__(self, message, fields=None):
        super().__init__(message)
        self.fields = fields or {}


class ParseError(ShiftIndexError):
    pass
