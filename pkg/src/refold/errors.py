"""Exception taxonomy shared across the package.

The CLI maps each class to a distinct exit code, so raise the most
specific one that applies.
"""


class RefoldError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(RefoldError):
    """Invalid configuration: bad field values, unparseable config files,
    divisibility violations in the stage plan, unresolvable ids."""


class ContractError(RefoldError):
    """An operation was called with arguments violating its contract,
    e.g. mismatched tensor shapes or an even convolution kernel."""


class NumericError(RefoldError):
    """A computation produced NaN/Inf or otherwise failed numerically."""
