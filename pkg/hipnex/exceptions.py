import sys


class HipnexError(Exception):
    pass


class InvalidState(HipnexError):
    pass


class NoCertificate(InvalidState):
    pass


class ParameterError(HipnexError, ValueError):
    pass


class DimensionMismatch(HipnexError, ValueError):
    pass


class SubproblemError(HipnexError):
    """
    Raised when a subproblem back-end cannot produce a σ̂-approximate
    solution. `best` holds the best iterate found (or None) and `diagnostics`
    a dict describing where the solver stopped.
    """
    def __init__(self, message, best=None, diagnostics=None):
        super(SubproblemError, self).__init__(message)
        self.best = best
        self.diagnostics = diagnostics or {}


class FactorizationError(SubproblemError):
    pass


class InnerIterationLimit(SubproblemError):
    pass


class InvariantViolation(HipnexError):
    def __init__(self, message, name=None, value=None, bound=None):
        super(InvariantViolation, self).__init__(message)
        self.name = name
        self.value = value
        self.bound = bound


class OracleError(HipnexError):
    pass


class SearchExhausted(HipnexError):
    pass


class BudgetExhausted(HipnexError):
    pass


def reraise(exc_type):
    """
    Turn the exception being handled into `exc_type`, e.g. a LinAlgError
    from a factorization into FactorizationError. Call from an `except`
    block; the original stays chained as the cause.
    """
    _, value, traceback = sys.exc_info()
    raise exc_type(str(value)).with_traceback(traceback) from value
