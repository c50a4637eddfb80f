"""Exception types raised across the package."""


class PinnForgeError(Exception):
    """Base class for package errors."""


class DiscontinuityPoint(PinnForgeError, ValueError):
    """Reference solution queried exactly on a jump discontinuity."""


class GridInfeasible(PinnForgeError, ValueError):
    """No near-square grid factorization yields the requested point count."""


class GridInfeasibleWarning(UserWarning):
    """A uniform grid fell back to a smaller point count."""


class ZeroNorm(PinnForgeError, ZeroDivisionError):
    """Relative error requested against an identically zero reference."""


class AllDiverged(PinnForgeError, RuntimeError):
    """Every trial of a search step diverged."""


class InsufficientData(PinnForgeError, ValueError):
    """Too few usable samples for a regression."""


class ConfigError(PinnForgeError, ValueError):
    """Malformed or unknown experiment configuration."""
