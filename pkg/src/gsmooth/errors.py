"""Exception types shared across the package.

The CLI maps ValidationError to exit code 1 and NumericalInstabilityError
to exit code 2.
"""


class ValidationError(ValueError):
    """Invalid input: bad dimensions, negative rates, mismatched grids."""


class NumericalInstabilityError(RuntimeError):
    """A propagated covariance / information matrix lost positivity."""


class DegenerateCombinationError(ValidationError):
    """State and effect carry no joint information along some direction."""
