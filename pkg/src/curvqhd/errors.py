"""Exception hierarchy shared by all modules."""


class CurvQHDError(Exception):
    """Base class for every error raised by the package."""


class DomainError(CurvQHDError, ValueError):
    """A point or field lies outside the region where an operation is defined."""


class PoleError(DomainError):
    """A point is too close to a coordinate singularity of the chart."""


class ConfigurationError(CurvQHDError, ValueError):
    """Inconsistent or unsupported configuration."""


class PositivityError(DomainError):
    """A density that must stay positive did not."""


class RepresentabilityError(ConfigurationError):
    """The chart's Ricci tensor is not constant and isotropic, so no
    (logarithmic) Schroedinger equation describes the hydrodynamics."""


class CFLError(CurvQHDError):
    """Time step exceeds the stability bound of the explicit integrator."""

    def __init__(self, message, suggested_dt):
        super().__init__(message)
        self.suggested_dt = suggested_dt
