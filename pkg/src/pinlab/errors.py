"""Exception hierarchy shared by all pinlab modules."""


class PinlabError(Exception):
    """Base class for every error raised by pinlab."""


class ParameterError(PinlabError, ValueError):
    """An argument is outside its admissible range."""


class DomainError(PinlabError, ValueError):
    """The requested quantity is not defined for this law or parameter regime."""


class DegenerateLawError(DomainError):
    """The renewal law carries no mass."""


class BoundaryError(PinlabError, ValueError):
    """The pinned endpoint N cannot be reached under the law's support."""


class SizeError(PinlabError, ValueError):
    """An exact computation would exceed its cost budget."""


class UnreliableEstimateError(PinlabError, RuntimeError):
    """A Monte Carlo estimate is dominated by a handful of samples."""


class BoundViolation(PinlabError, ArithmeticError):
    """A deterministic inequality that must hold was found violated."""
