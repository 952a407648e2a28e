"""Exception types shared by all engines."""


class LRSwapError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(LRSwapError, ValueError):
    pass


class UnsupportedRuleError(InvalidParameterError):
    """The requested rule type has no well-defined dynamics."""


class ResourceLimitError(LRSwapError):
    pass


class SingularityError(LRSwapError, ArithmeticError):
    """A matrix factor that must be inverted is singular.

    ``block`` names the offending species block when known.
    """

    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class NumericalInconsistencyWarning(RuntimeWarning):
    pass
