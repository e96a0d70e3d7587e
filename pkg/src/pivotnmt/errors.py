"""Error types shared across the package."""


class PivotNmtError(Exception):
    """Base class for all package errors."""


class ShapeError(PivotNmtError, ValueError):
    """Operand shapes do not satisfy an operation's contract."""


class NumericError(PivotNmtError, ArithmeticError):
    """Non-finite or otherwise invalid numeric input."""


class ContractError(PivotNmtError, ValueError):
    """An operation was called outside its contract (e.g. backward on a non-scalar)."""


class ConfigError(PivotNmtError, ValueError):
    """Inconsistent or invalid configuration."""


class InputError(PivotNmtError, ValueError):
    """Invalid user-supplied data (empty corpus, ragged files, ...)."""


class IoError(PivotNmtError, OSError):
    """File-system refusals: clobbering without --overwrite, missing artifacts."""
