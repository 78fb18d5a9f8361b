"""Exception hierarchy shared across the package."""


class ContractionError(Exception):
    """Base class for all library errors."""


class ParameterError(ContractionError, ValueError):
    """A family parameter or model field is outside its valid range."""


class PreconditionError(ContractionError):
    """A caller-asserted condition required by a formula is missing."""


class DomainError(ContractionError, ValueError):
    """The input lies outside the domain where a formula is defined."""


class PreAsymptoticError(DomainError):
    """The threshold is too small for the asymptotic formula to make sense."""


class UnreliableRegionError(ContractionError):
    """Survival probability underflows and no log-scale path is available."""


class QuadratureError(ContractionError):
    """Adaptive quadrature failed to reach its target accuracy.

    ``estimate`` and ``error_bound`` carry the best result obtained.
    """

    def __init__(self, message, estimate=float("nan"), error_bound=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class RarityError(ContractionError):
    """Monte Carlo cannot resolve an event this rare."""
