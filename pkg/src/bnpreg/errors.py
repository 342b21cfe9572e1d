"""Exception types shared across the package."""


class BnpregError(Exception):
    """Base class for all package errors."""


class DomainError(BnpregError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ConfigError(BnpregError, ValueError):
    """An experiment or sampler configuration is invalid or inconsistent."""


class UnsupportedBasisError(BnpregError, TypeError):
    """The requested operation is not defined for this basis family."""


class NumericalError(BnpregError, RuntimeError):
    """A linear-algebra or quadrature step failed beyond recovery."""


class SamplerError(BnpregError, RuntimeError):
    """An MCMC update reached an invalid state; message carries a state dump."""
