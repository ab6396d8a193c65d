"""Exception types shared across the package.

Each carries the process exit code the command line maps it to.
"""


class AopinnError(Exception):
    exit_code = 1


class ConfigError(AopinnError, ValueError):
    """Invalid or inconsistent configuration."""

    exit_code = 2


class DomainError(AopinnError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 2


class NumericFailure(AopinnError, ArithmeticError):
    """A NaN/Inf appeared in a forward pass, gradient or optimizer state."""

    exit_code = 3


class IntegrationError(NumericFailure):
    pass


class SingularityError(NumericFailure):
    """Reconstruction divided by an infectious fraction below the floor."""


class CappedComputation(AopinnError, RuntimeError):
    """A bounded symbolic computation ran out of budget."""

    exit_code = 4
