"""Exception hierarchy.

Every validation failure raises a subclass of :class:`NodbrError`; the CLI
reports the class name, so names double as stable error codes.
"""


class NodbrError(ValueError):
    """Base class for all validation errors raised by the package."""


class AsymmetricKernel(NodbrError):
    pass


class BadLength(NodbrError):
    pass


class DegenerateKernel(NodbrError):
    pass


class NoUniqueDominantMode(NodbrError):
    pass


class DominantModeNotPlanar(NodbrError):
    pass


class NonFiniteState(NodbrError):
    pass


class StepTooLarge(NodbrError):
    pass


class NotAnEquilibrium(NodbrError):
    pass


class ZeroCubicCoefficient(NodbrError):
    pass


class NotSupercritical(NodbrError):
    pass


class NotSubcritical(NodbrError):
    pass


class NotInCoexistence(NodbrError):
    pass


class AliasedHarmonic(NodbrError):
    pass
