"""Exception types shared across the package.

The CLI maps each class to its own exit code.
"""


class ConfigError(ValueError):
    """Invalid or unsupported configuration (bad parameter, missing key)."""


class DataError(ValueError):
    """Malformed or out-of-range input data."""


class EstimationError(ArithmeticError):
    """Numerical failure during estimation, e.g. a density below its bound."""
