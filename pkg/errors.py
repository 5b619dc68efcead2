"""Exception hierarchy shared by the solvers, oracles and the command-line harness."""


class SdroError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(SdroError, ValueError):
    """Invalid configuration value, preset or parameter combination."""


class EvaluationDomainError(SdroError, ArithmeticError):
    """A loss value or gradient came back non-finite."""


class DegenerateInputError(SdroError, ValueError):
    """Input admits no meaningful answer (e.g. every probe pair coincides)."""


class NonNormalizableError(SdroError, ValueError):
    """The worst-case density exp((f - lambda/2 |x - z|^2) / (lambda eps)) has infinite mass."""


class UnsupportedDimensionError(SdroError, ValueError):
    """Requested an oracle in a dimension it does not support."""


class DivergenceError(SdroError, ArithmeticError):
    """An iterate became non-finite.

    *step* is the iteration at which it happened, *hint* an optional remedy.
    """

    def __init__(self, message, step=None, hint=None):
        if hint:
            message = f"{message} ({hint})"
        super().__init__(message)
        self.step = step
        self.hint = hint
