"""Exception types shared across the package.

ConfigError maps to CLI exit code 2, NumericalError to exit code 3.
"""


class ConfigError(ValueError):
    """Raised for invalid task sets, reservations, or config documents.

    The message always names the offending field.
    """


class NumericalError(RuntimeError):
    """Raised when an iterative numerical routine fails to converge."""
