"""Exception types shared across the package.

Each exception carries the CLI exit code it maps to, so the command-line
layer can translate failures without a lookup table.
"""


class NuczenoError(Exception):
    exit_code = 2


class ConfigError(NuczenoError, ValueError):
    """Invalid configuration document or parameter set."""

    exit_code = 1

    def __init__(self, message, key=None):
        self.key = key
        if key is not None and key not in message:
            message = f"{key}: {message}"
        super().__init__(message)


class SingularParametersError(NuczenoError, ArithmeticError):
    """A reflection coefficient or derived quantity has a vanishing denominator."""


class NoQuadraticDecayError(NuczenoError, ArithmeticError):
    """The double-commutator trace defining the Zeno time is not positive."""


class UndefinedCorrelationError(NuczenoError, ArithmeticError):
    """No cross-polarised scattering, so g2 has a zero denominator."""
