"""Exception types shared across the package."""


class ModelEvaluationError(RuntimeError):
    """A model evaluator returned a non-finite value.

    Carries the offending base point and velocity so the caller can see
    where the model blew up.
    """

    def __init__(self, message, x=None, v=None):
        super().__init__(message)
        self.x = x
        self.v = v


class UnsupportedModelError(ValueError):
    """Operation requires model properties (e.g. 2-homogeneity) that do not hold."""


class AdmissibilityError(ValueError):
    """The energy level kappa is too large, or the path is degenerate."""


class ConstraintViolationError(ValueError):
    """A path (or variation) violates the constant-charge constraint tolerance."""


class ScenarioError(ValueError):
    """A scenario or model definition file could not be parsed."""
