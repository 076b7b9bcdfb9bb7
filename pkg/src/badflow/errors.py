"""Exception and warning types raised across the package."""


class BadflowError(Exception):
    """Base class for all package errors."""


class NotTotallyImaginary(BadflowError, ValueError):
    pass


class NotAField(BadflowError, ValueError):
    pass


class ZeroElement(BadflowError, ValueError):
    pass


class NotAdmissible(BadflowError, ValueError):
    """q does not lie in O_K(r, eps)."""


class NoClass(BadflowError, ValueError):
    """A radius falls in a gap between the ball-class bands."""


class BudgetExceeded(BadflowError):
    pass


class RatioNotConstant(BadflowError):
    """A resonant band produced pairs with different ratios."""


class NotUnimodular(BadflowError, ValueError):
    pass


class DegenerateLattice(BadflowError, ValueError):
    pass


class InsufficientData(BadflowError, ValueError):
    pass


class Unsupported(BadflowError, NotImplementedError):
    pass


class ConfigError(BadflowError, ValueError):
    pass


class IllegalMove(BadflowError):
    def __init__(self, player, round_index, reason):
        super().__init__(f"illegal move by {player} in round {round_index}: {reason}")
        self.player = player
        self.round_index = round_index
        self.reason = reason


class EmptyRange(UserWarning):
    pass


class VacuousWeight(UserWarning):
    """Sigma_0 contains the conjugate of a Sigma_+ embedding."""
