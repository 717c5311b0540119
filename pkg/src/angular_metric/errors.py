"""Exception types shared by all modules."""


class AngularMetricError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(AngularMetricError, ValueError):
    """Arguments violate a precondition (shape, range, parity...)."""


class SamplingError(AngularMetricError):
    """The dataset cannot satisfy the requested sampling scheme."""


class NumericalError(AngularMetricError, ArithmeticError):
    """A computation produced a non-finite value or hit a singular point."""


class ParseError(AngularMetricError):
    """A feature or model file is malformed."""
