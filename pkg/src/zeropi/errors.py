"""Exception hierarchy shared across the package."""


class ZeroPiError(Exception):
    """Base class for all package errors."""


class DomainError(ZeroPiError, ValueError):
    """A physical parameter lies outside its allowed domain."""


class UsageError(ZeroPiError, ValueError):
    """An argument combination is not supported."""


class ResourceError(ZeroPiError):
    """A requested problem exceeds a configured size limit."""


class ConvergenceError(ZeroPiError):
    """An iterative solve did not converge.

    The partially converged solution, if any, is attached as ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ResonanceError(ZeroPiError):
    """A perturbative denominator vanished for the listed level pair."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class LabelingError(ZeroPiError):
    """Dressed-state labeling produced duplicate labels."""

    def __init__(self, message, conflicts=None):
        super().__init__(message)
        self.conflicts = conflicts or []


class ZeroPiWarning(UserWarning):
    """Base class for numerical-validity warnings recorded in run manifests."""


class DispersiveWarning(ZeroPiWarning):
    """Coupling-to-detuning ratio outside the dispersive regime."""


class TruncationWarning(ZeroPiWarning):
    """A basis or level cutoff failed its convergence check."""


class HybridizationWarning(ZeroPiWarning):
    """A dressed state has no dominant bare-product component."""
