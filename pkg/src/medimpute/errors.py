"""Exception types shared across the package.

The CLI maps these onto exit codes: DataError -> 2, NumericalError -> 3.
"""


class DataError(ValueError):
    """Malformed input data, schema violations, or unimputable columns."""


class NumericalError(ArithmeticError):
    """A computation produced non-finite values or failed to converge."""
