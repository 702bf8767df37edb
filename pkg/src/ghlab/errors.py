"""Exception types raised across ghlab."""


class GhlabError(Exception):
    """Base class for all library errors."""


class NotHyperbolic(GhlabError):
    pass


class RelatorSearchFailed(GhlabError):
    pass


class NewtonDiverged(GhlabError):
    pass


class InsufficientData(GhlabError):
    pass


class DegenerateConfiguration(GhlabError):
    pass


class NonConvergence(GhlabError):
    pass


class NotOnPressureZero(GhlabError):
    pass


class NotTangent(GhlabError):
    pass


class GramSingular(GhlabError):
    pass


class EnumerationBudgetExceeded(GhlabError):
    pass


class InvalidElement(GhlabError):
    """A matrix failed the group or algebra invariant check."""
