"""Exception hierarchy shared by all modules."""


class CircleMapError(Exception):
    """Base class for every error raised by :mod:`circlemaps`."""


class NonConvergence(CircleMapError):
    pass


class NotADiffeo(CircleMapError):
    pass


class ResolutionTooCoarse(CircleMapError):
    pass


class PrecisionLoss(CircleMapError):
    pass


class BasePointMismatch(CircleMapError):
    pass


class NotInvertible(CircleMapError):
    pass


class ChainMismatch(CircleMapError):
    pass


class NotParabolic(CircleMapError):
    pass


class EvenLeadingOrder(CircleMapError):
    pass


class InsufficientOrder(CircleMapError):
    pass


class DegreeTooHigh(CircleMapError):
    pass


class HypothesisViolated(CircleMapError):
    pass


class ConstructionFailed(CircleMapError):
    pass


class TargetsTooFar(CircleMapError):
    pass


class HorizonNotFound(CircleMapError):
    pass


class QuadratureFailure(CircleMapError):
    pass


class PointOnBoundary(CircleMapError):
    pass


class NoEntry(CircleMapError):
    pass


class NotConverged(CircleMapError):
    pass


class SpecError(CircleMapError):
    """Malformed map or density spec."""


class StageError(CircleMapError):
    """Wraps an error raised inside one stage of a pipeline."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
