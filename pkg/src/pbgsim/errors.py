"""Exception hierarchy shared by all pbgsim modules."""


class PbgsimError(Exception):
    """Base class for all pbgsim errors."""


class ParameterDomainError(PbgsimError, ValueError):
    """A physical parameter is outside its admissible domain."""


class DegenerateCurvatureError(ParameterDomainError):
    """The band-edge curvature is undefined (sin term vanishes)."""


class SingularityError(PbgsimError, ValueError):
    """Evaluation requested exactly at a non-removable singular point."""


class PoleError(PbgsimError, ArithmeticError):
    """The resolvent denominator vanished at an evaluation point."""


class AccuracyError(PbgsimError, RuntimeError):
    """A numerical result violates a stated tolerance.

    The message says which invariant failed and which knob (grid, window,
    contour offset) to refine.
    """


class StepperError(PbgsimError, RuntimeError):
    """The explicit integrator detected an instability (norm growth)."""


class ConfigError(PbgsimError, ValueError):
    """A run configuration failed to parse or validate."""
