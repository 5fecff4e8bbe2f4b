"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array rank or extents violate an operation's contract."""


class ConfigError(ValueError):
    """Invalid hyperparameter or configuration value."""


class NumericError(ArithmeticError):
    """Non-finite value encountered where finite arithmetic is required."""


class ParseError(ValueError):
    """Malformed label or filename token."""


class IngestError(ValueError):
    """Malformed or incomplete input data file."""


class CheckpointError(RuntimeError):
    """Unreadable, corrupt, or inconsistent container file."""
