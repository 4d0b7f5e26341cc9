"""Exception hierarchy shared by every techrank module."""


class TechRankError(Exception):
    """Base class for all techrank errors."""


class GraphConstructionError(TechRankError, ValueError):
    pass


class ParameterRangeError(TechRankError, ValueError):
    """Raised when (alpha, beta) push degree powers out of floating range."""


class UndefinedCorrelationError(TechRankError, ValueError):
    pass


class CalibrationError(TechRankError):
    pass


class DegenerateFactorError(TechRankError, ValueError):
    """A factor cannot be max-normalized (all zero, or zero spread)."""


class AlignmentError(TechRankError, ValueError):
    pass


class DataError(TechRankError):
    """Input files are unreadable, malformed or yield nothing usable."""


class ConfigError(TechRankError):
    pass
