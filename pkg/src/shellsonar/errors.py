"""Exception types shared across the pipeline."""


class ParameterError(ValueError):
    """An argument violates an operation's preconditions."""


class NumericalError(ArithmeticError):
    """A computation produced non-finite or unusable values."""


class IllConditionedBandError(NumericalError):
    """The reference pulse carries too little energy in the requested band."""


class NoDetectionError(RuntimeError):
    """No echo peak exceeded the detection threshold inside the range gate."""
