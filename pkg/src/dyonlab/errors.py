"""Exception hierarchy shared by all modules."""


class DyonlabError(Exception):
    """Base class for every error raised by the package."""


class DomainError(DyonlabError, ValueError):
    """Input outside the valid domain of a metric, formula or quantum number."""


class SingularityError(DomainError):
    """Evaluation at a point where the quantity diverges (r = 0, on a center)."""


class ProximityError(SingularityError):
    """A point lies closer than the proximity guard to a dyon center."""


class StringProximityError(SingularityError):
    """A point lies on (or too close to) the Dirac string of a vector potential."""


class ConvergenceError(DyonlabError, RuntimeError):
    """A numerical procedure did not reach its requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class IntegrationAborted(DyonlabError, RuntimeError):
    """Integration stopped early; ``partial`` holds the trajectory computed so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ConfigError(DyonlabError, ValueError):
    """Malformed or semantically invalid experiment configuration."""
