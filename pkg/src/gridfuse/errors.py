"""Exception hierarchy.

Plain ValueError is reserved for invalid call arguments (bad shapes, bad
parameter ranges).  Everything rooted at GridFuseError describes a problem
with external data or a numerical procedure, and maps to CLI exit code 3.
"""


class GridFuseError(Exception):
    """Base class for toolkit-specific failures."""


class DataError(GridFuseError):
    """An input file or payload is malformed or inconsistent."""


class ValidationError(GridFuseError):
    """Content-level check failed (wrong zones, dtype, label range...)."""


class ConvergenceError(GridFuseError):
    """An iterative solve did not reach tolerance within its budget."""


class PlyError(DataError):
    """A PLY document could not be parsed or is unsupported."""
