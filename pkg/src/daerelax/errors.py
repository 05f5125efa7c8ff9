"""Exception hierarchy shared by the analysis and modification modules."""


class DaeError(Exception):
    """Base class for every error raised by the package."""


class SampleDomainError(DaeError):
    """Random sampling kept landing outside the domain of an expression."""


class IndexOutOfRange(DaeError, IndexError):
    pass


class MissingClosedForm(DaeError):
    pass


class DegenerateEliminationError(DaeError):
    """Probabilistic zero tests disagreed with each other across reseeds."""


class NonlinearTargetsError(DaeError):
    """The equations to be solved are not affine in the target derivatives."""


class SingularAtConstructionError(DaeError):
    """A pivot or a divisor was accepted as identically zero."""


class LCConditionError(DaeError):
    """The cokernel vector depends on a highest-order derivative."""


class MissingXiValue(DaeError):
    pass


class XiSingularError(DaeError):
    """The pivot block becomes singular once the frozen constants are substituted."""


class PostconditionViolation(DaeError):
    pass


class MethodFailure(DaeError):
    """A modification step failed and no fallback method remained."""

    def __init__(self, message, cause=None):
        super().__init__(message)
        self.cause = cause


class IterationBudgetExceeded(DaeError):
    pass


class DaeSyntaxError(DaeError):
    def __init__(self, message, line=None, col=None):
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.col = col


class UnknownSymbol(DaeSyntaxError):
    pass


class NonSquareSystem(DaeError):
    pass
