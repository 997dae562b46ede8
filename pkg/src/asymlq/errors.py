"""Exception hierarchy shared by all asymlq modules."""


class AsymlqError(Exception):
    """Base class for every error raised by this package."""


class SolverError(AsymlqError):
    """A numerical solver could not produce a trustworthy answer."""


class NotStable(SolverError):
    pass


class NoConvergence(SolverError):
    pass


class NotStabilizing(SolverError):
    pass


class ValueUnbounded(SolverError):
    """The maximizer's Riccati equation has no solution with R + B'PB < 0.

    Raised when the maximizer's input penalty is not negative enough for the
    upper value of the game to stay finite.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        # partial GameTrace, attached by run_best_response
        self.trace = trace


class Defective(SolverError):
    pass


class NotPSD(SolverError):
    pass


class NearSingularCauchy(SolverError):
    pass


class SingularShift(SolverError):
    pass


class R2SearchFailed(SolverError):
    pass


class ParseError(AsymlqError):
    """A model file could not be read; ``field`` names the offending entry."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line


class ValidationError(AsymlqError):
    def __init__(self, report):
        lines = "; ".join(f"{v.check}: {v.message}" for v in report.violations)
        super().__init__(f"invalid game spec: {lines}")
        self.report = report
