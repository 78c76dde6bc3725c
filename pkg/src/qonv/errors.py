"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Tensor shapes do not satisfy an operation's contract."""


class ConfigurationError(ValueError):
    """A spec, encoding, or experiment configuration is invalid."""


class ContractError(RuntimeError):
    """An operation was called in a way its contract forbids."""


class NumericError(ArithmeticError):
    """A numeric routine produced or encountered a non-finite value."""


class ImageIOError(IOError):
    """An image file could not be read or written."""


class RiskChainViolation(AssertionError):
    """The monotone risk chain failed on a concrete instance.

    Carries a deterministic text record of the offending instance so the
    failure can be reproduced exactly.
    """

    def __init__(self, message, record):
        super().__init__(message)
        self.record = record
