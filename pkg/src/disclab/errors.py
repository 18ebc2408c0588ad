"""Exception types raised across the package."""


class LabError(ValueError):
    """Base class for invalid inputs and failed checks."""


class ResourceLimitError(LabError):
    """Requested object would exceed the supported size."""


class UnboundedError(LabError):
    """Operation needs a bounded shape."""


class UnsupportedPairError(LabError):
    """No exact evaluation path and no empirical fallback supplied."""


class CertificationError(LabError):
    """A numerically certified invariant did not hold."""


class ResolutionError(LabError):
    """A grid is too coarse for the requested quantity."""
