"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, NumericalError
(including GridOverflowError) -> 2.
"""


class ConfigError(ValueError):
    """Invalid configuration, rejected before any computation starts."""


class NumericalError(RuntimeError):
    """A computation failed numerically (e.g. no accepted paths)."""


class GridOverflowError(NumericalError):
    """Significant probability mass fell outside the fading-coefficient grid."""
