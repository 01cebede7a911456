"""Exception types raised across the package."""

import numpy as np


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class UsageError(ValueError):
    """Malformed or inconsistent call (empty inputs, bad shapes, unknown names)."""


class FitError(RuntimeError):
    """A least-squares fit failed; ``result`` holds the best candidate found."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class SaturationError(RuntimeError):
    """Detected optical power exceeds the detector's linear range."""

    def __init__(self, message, power_mw=None, pixel=None):
        super().__init__(message)
        self.power_mw = power_mw
        self.pixel = pixel


class IndeterminatePhaseError(RuntimeError):
    """No coherent component strong enough to lock the LO phase to."""


class InsufficientSegmentsError(ValueError):
    pass


class DegenerateError(ValueError):
    pass


class InvalidRegionError(ValueError):
    pass


class SingularMatrixError(np.linalg.LinAlgError):
    """Spectra matrix too ill-conditioned to unmix."""
