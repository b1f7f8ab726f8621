"""Exception types raised by psilab."""


class PsilabError(Exception):
    """Base class for all library errors."""


class GridError(PsilabError):
    """Grid construction or grid mismatch problems."""


class ResolutionError(GridError):
    """The grid does not resolve the requested derivative or symbol."""


class ConvergenceError(PsilabError):
    """A discretized integral has not converged on the truncated box."""


class AliasingError(PsilabError):
    """Spectral content too close to the edge of the frequency box."""


class HypothesisError(PsilabError):
    """Input violates the hypotheses of the requested construction."""


class PsiConditionError(PsilabError):
    """A symbol family violates the sign-change rule in time."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ConfigError(PsilabError):
    """Invalid run configuration."""
