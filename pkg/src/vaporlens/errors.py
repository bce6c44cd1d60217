"""Exception hierarchy shared across the package.

Concrete exceptions subclass one of three groups so the command line can
map failures onto its exit codes: configuration problems (exit 2),
physics/grid problems (exit 3), and fitting problems (exit 4).
"""


class VaporlensError(Exception):
    """Base class for all package errors."""


class ConfigError(VaporlensError):
    """Malformed or inconsistent configuration input."""


class PhysicsError(VaporlensError):
    """A physics or grid precondition was violated."""


class FitError(VaporlensError):
    """A spectral-fitting precondition or numerical failure."""
