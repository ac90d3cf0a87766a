"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, NumericError -> 3,
IoError -> 4.
"""


class ChimromError(Exception):
    """Base class for package errors."""


class ConfigError(ChimromError):
    """Invalid configuration, degenerate parameter ranges, bad presets."""


class DomainError(ChimromError):
    """Incompatible meshes, extents, shapes or out-of-domain queries."""


class GeometryError(ChimromError):
    """Degenerate or invalid geometry (zero-length elements, misplaced sensors)."""


class NumericError(ChimromError):
    """Numerical failure: non-convergence, breakdown, ill-posedness."""


class ConvergenceError(NumericError):
    """Iteration failed to reach its tolerance; carries diagnostics."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = dict(diagnostics)


class IllPosedError(NumericError):
    """Rank-deficient or unobservable reconstruction problem."""


class IoError(ChimromError):
    """File-format violations and missing inputs."""
