class SquatsError(Exception):
    """Base class for errors raised by this package."""


class FeasibilityError(SquatsError, ValueError):
    """Requested parameters cannot be realised (e.g. too few distinct codewords)."""


class BudgetExceeded(SquatsError):
    """A decoder search hit its node budget.

    ``partial`` holds the best result found before the search was cut off.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ConfigError(SquatsError, ValueError):
    """An experiment or command configuration is malformed."""
