"""Exception types raised by the library."""


class FormatError(ValueError):
    """A file could not be parsed or has the wrong shape."""


class VersionError(FormatError):
    """A versioned file was written by an incompatible format version."""


class ValidationError(ValueError):
    """Inputs violate a documented contract (bad category, missing field, ...)."""


class PlanningError(RuntimeError):
    """Base class for plan-generation failures."""


class NoFeasibleLayoutError(PlanningError):
    """No corpus scene contains the requested target categories."""


class InfeasibleMatchError(PlanningError):
    """A candidate scene has fewer objects than there are non-victims to match."""

    def __init__(self, needed: int, available: int):
        super().__init__(
            f"candidate has {available} objects but {needed} non-victim "
            f"objects need a match"
        )
        self.needed = needed
        self.available = available


class AllCandidatesRejectedError(PlanningError):
    """Every candidate failed the matched-fraction gate.

    Carries the best rejected candidate so callers can report why the
    scene is unplannable.
    """

    def __init__(self, message: str, best_rejected=None):
        super().__init__(message)
        self.best_rejected = best_rejected
