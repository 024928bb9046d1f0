"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Bad dimensions, indices, budgets or configuration values."""


class NumericError(ArithmeticError):
    """Non-finite input or a solver that failed to certify its answer."""


class DataError(ValueError):
    """Malformed count data (negative counts, inconsistent tables)."""


class ContractError(RuntimeError):
    """A runtime contract between components was violated."""
