"""Exception types raised across the package."""


class SpecfuseError(ValueError):
    """Base class for all errors raised by specfuse."""


class ShapeMismatch(SpecfuseError):
    pass


class EvenKernel(SpecfuseError):
    pass


class BadFactor(SpecfuseError):
    pass


class NotDivisible(SpecfuseError):
    pass


class NonFiniteInput(SpecfuseError):
    pass


class BadStep(SpecfuseError):
    pass


class BadParams(SpecfuseError):
    pass


class BacktrackStall(RuntimeError):
    """Descent inequality still violated after the retry budget was used up."""


class InnerSolveDiverged(RuntimeError):
    pass


class NotNormalized(SpecfuseError):
    pass


class RadiusTooLarge(SpecfuseError):
    pass


class OffsetOutOfWindow(SpecfuseError):
    pass


class ImageTooSmall(SpecfuseError):
    pass


class GeometryMismatch(SpecfuseError):
    pass


class UnsupportedFormat(SpecfuseError):
    pass


class CorruptFile(SpecfuseError):
    pass
