"""Exception and warning types raised by lpweber."""


class LpWeberError(Exception):
    """Base class for all lpweber errors."""


class EmptyInstance(LpWeberError, ValueError):
    pass


class NonPositiveWeight(LpWeberError, ValueError):
    pass


class ParamOutOfRange(LpWeberError, ValueError):
    pass


class DimensionMismatch(LpWeberError, ValueError):
    pass


class SingularPoint(LpWeberError, ValueError):
    """The iterate lies on the singular set, where the plain gradient or the
    Weiszfeld operator is undefined."""


class AtMinimum(LpWeberError):
    """A descent direction was requested at a certified minimum."""


class LineSearchExhausted(LpWeberError):
    """No cost decrease was found within the allowed number of step shrinks."""

    def __init__(self, message, trials=0):
        super().__init__(message)
        self.trials = trials


class NonFiniteIterate(LpWeberError, FloatingPointError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class TrajectoryTooShort(LpWeberError, ValueError):
    pass


class WrongParams(LpWeberError, ValueError):
    pass


class EmptyInput(LpWeberError, ValueError):
    pass


class SingularStencil(LpWeberError, ValueError):
    pass


class HitDataPoint(LpWeberError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ParseError(LpWeberError, ValueError):
    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class NonPositiveRelative(ParseError):
    pass


class CollinearWarning(UserWarning):
    """All data points lie on a single line; the minimizer may not be unique."""


class ZeroVarianceWarning(UserWarning):
    """Returns have zero sample variance; the Sharpe ratio is reported as 0."""
