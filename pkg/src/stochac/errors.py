"""Exception types shared across the package."""


class StochacError(Exception):
    """Base class for all package-specific failures."""

    code = "error"


class ParameterError(StochacError):
    """A parameter violates a model invariant (e.g. gamma >= 2/3)."""

    code = "parameter"


class SupportWindowError(StochacError):
    """A convolution window extends past the sampled path support."""

    code = "support_window"


class ConvergenceError(StochacError):
    """An iterative solver failed to converge or produced an invalid solution."""

    code = "convergence"


class StabilityError(StochacError):
    """A time step violated the stability rule or produced non-finite values."""

    code = "stability"


class NoInterfaceError(StochacError):
    """A field has no zero crossing to extract."""

    code = "no_interface"


class SingularityError(StochacError):
    """The resolvent factor (I - q A) is numerically singular (focal point)."""

    code = "singularity"
