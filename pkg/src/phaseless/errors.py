"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`PhaselessError`.
Errors caused by bad user input additionally derive from :class:`ValueError`
so that generic callers can catch them the usual way.
"""


class PhaselessError(Exception):
    """Base class for all library errors."""


class InvalidOrder(PhaselessError, ValueError):
    pass


class DegenerateDirectionMatrix(PhaselessError, ValueError):
    pass


class EmptyRestriction(PhaselessError, ValueError):
    pass


class WrongDimension(PhaselessError, ValueError):
    pass


class TooManyVertices(PhaselessError, ValueError):
    pass


class TooManyVectors(PhaselessError, ValueError):
    pass


class SearchLimitExceeded(PhaselessError, RuntimeError):
    """A subset enumeration hit its node budget before finishing."""


class CandidatesInsufficient(PhaselessError, ValueError):
    pass


class RankDeficientPatch(PhaselessError, ValueError):
    pass


class CoverageViolation(PhaselessError, ValueError):
    pass


class LocalDependence(PhaselessError, ValueError):
    pass


class FrameSearchExhausted(PhaselessError, RuntimeError):
    pass


class UnsupportedGenerator(PhaselessError, ValueError):
    pass


class NonFiniteInput(PhaselessError, ValueError):
    pass


class PhaseConflict(PhaselessError, RuntimeError):
    """Phase adjustment found a pair of patches it cannot make consistent."""

    def __init__(self, message, pair=None, inner=None):
        super().__init__(message)
        self.pair = pair
        self.inner = inner


class FileFormatError(PhaselessError, ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, path, message, line=None):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line
