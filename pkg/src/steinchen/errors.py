"""Exception types shared across the package.

The CLI maps these onto exit codes, so every failure a user can trigger
should surface as one of them.
"""


class SteinChenError(Exception):
    """Base class for package errors."""


class DomainError(SteinChenError, ValueError):
    """An argument lies outside the domain of the requested quantity."""


class SizeError(SteinChenError, ValueError):
    """A brute-force computation was asked for a system that is too large."""


class UnsupportedInputError(SteinChenError, ValueError):
    """The available moment information cannot determine the quantity."""


class InvalidStructureError(SteinChenError, ValueError):
    """A declared dependence structure is contradicted by the joint law."""


class NumericError(SteinChenError, ArithmeticError):
    """A numerical solve failed or produced an unusable result."""


class BoundViolation(SteinChenError, AssertionError):
    """A verified inequality failed; this indicates a bug, not bad input."""
