"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Raised when tensor shapes do not satisfy an operation's contract."""


class ConfigError(ValueError):
    """Raised for invalid, missing, or inconsistent configuration."""
