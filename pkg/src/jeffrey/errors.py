"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input does not describe a valid distribution, channel, or file."""


class DimensionError(ValidationError):
    """Domain sizes of the operands disagree."""


class PlausibilityError(ValidationError):
    """The observations charge outputs the current prior cannot produce.

    ``outputs`` lists the offending output indices.
    """

    def __init__(self, message, outputs=()):
        super().__init__(message)
        self.outputs = tuple(int(y) for y in outputs)


class EmptyDomainError(ValidationError):
    """Pruning removed every input."""
