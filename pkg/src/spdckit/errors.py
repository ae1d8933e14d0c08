"""Exception hierarchy shared by the toolkit.

Validation problems (bad parameters, malformed config) derive from
``ValidationError``; failures of a numerical procedure on otherwise valid
input derive from ``NumericalError``. The CLI maps them to exit codes 1 and 2.
"""


class ValidationError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class EstimationError(NumericalError):
    pass


class NoExcessCoincidencesError(EstimationError):
    """Measured coincidences do not exceed the accidental + noise floor."""


class ApproximationWarning(UserWarning):
    """Parameters leave the small-loss / low-pair-probability regime."""
