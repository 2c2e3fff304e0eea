"""Error taxonomy shared across the lab.

All errors derive from ValueError so callers that only know stdlib Python can
still catch them generically.
"""


class FalconerLabError(ValueError):
    """Base class for all lab-specific errors."""


class ConfigurationError(FalconerLabError):
    """Invalid or inconsistent configuration (bad keys, infeasible geometry)."""


class DomainError(FalconerLabError):
    """Input outside the mathematical domain of an operation."""


class DegenerateInputError(FalconerLabError):
    """Input technically valid but degenerate (e.g. a single-atom measure)."""


class NumericalIntegrityError(FalconerLabError):
    """A numerical self-check failed beyond its hard limit."""


class PerturbationError(FalconerLabError):
    """Perturbed level-set correction did not converge."""


class SamplingError(FalconerLabError):
    """Rejection sampling failed to produce admissible points."""
