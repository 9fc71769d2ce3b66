"""
biodelay Errors

Exception hierarchy shared by the model, stability, simulation and fitting modules.
"""

from typing import Optional


class BioDelayError(Exception):
    """Base class for every error raised by the biodelay library."""


class DomainError(BioDelayError):
    """
    Raised when an argument lies outside the domain of a formula.

    Attributes:
        condition: Short machine-readable name of the violated precondition
    """

    def __init__(self, condition: str, message: str):
        self.condition = condition
        self.message = message
        super().__init__(f"{condition}: {message}")


class NoEquilibriumError(BioDelayError):
    """Raised when a command needs a positive equilibrium and none exists."""


class StructureError(BioDelayError):
    """Raised when a quasi-polynomial does not have the expected shape."""


class UnstableAtZeroDelayError(BioDelayError):
    """Raised when a stability window is requested for a system unstable at tau=0."""


class ContourProximityError(BioDelayError):
    """Raised when a root keeps landing on the counting contour after all retries."""

    def __init__(self, sigma: float, min_modulus: float, retries: int):
        self.sigma = sigma
        self.min_modulus = min_modulus
        self.retries = retries
        super().__init__(
            f"Root on contour for sigma={sigma} (min |q|={min_modulus:.3e}) "
            f"after {retries} jittered retries"
        )


class DegenerateError(BioDelayError):
    """Raised when a computation has no meaningful answer for its input."""


class EmptyRegionError(BioDelayError):
    """Raised when the sigma=0 stability region is empty on the searched box."""


class SimulationBlowUpError(BioDelayError):
    """
    Raised when the integrated state stops being finite.

    Attributes:
        last_time: Last time at which the state was still finite
    """

    def __init__(self, last_time: float, detail: Optional[str] = None):
        self.last_time = last_time
        message = f"Non-finite state after t={last_time:g}"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class StepSizeError(BioDelayError):
    """Raised when the step size is too coarse for the delays in the model."""


class DatasetError(BioDelayError):
    """Raised when an experimental dataset fails its schema checks."""
