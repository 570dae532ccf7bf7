"""Exception hierarchy.

Every failure the library raises on purpose derives from ``SemiclassicalError``
so the CLI can map domain errors to exit code 1.
"""


class SemiclassicalError(Exception):
    """Base class for domain errors."""


class NearTangency(SemiclassicalError):
    pass


class NoRealRoots(SemiclassicalError):
    pass


class NotClosed(SemiclassicalError):
    pass


class StepCollapse(SemiclassicalError):
    pass


class CurveTraceFailure(SemiclassicalError):
    pass


class EndpointAtTurningPoint(SemiclassicalError):
    pass


class NonMonotoneAction(SemiclassicalError):
    pass


class GridTooCoarse(SemiclassicalError):
    pass


class TooCloseToTurningPoint(SemiclassicalError):
    pass


class OutsideClassicalRegion(SemiclassicalError):
    pass


class NotBohrSommerfeld(SemiclassicalError):
    pass


class AlphaZero(SemiclassicalError):
    pass


class NonSimpleTurningPoint(SemiclassicalError):
    pass


class TangentialIntersection(SemiclassicalError):
    pass


class TangencyAtEndpoint(SemiclassicalError):
    pass


class NotRealizable(SemiclassicalError):
    pass
