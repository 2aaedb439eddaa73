"""Exception types shared across the package."""


class InvalidConfigError(ValueError):
    """A configuration value violates a precondition of the scheme."""


class ContractionConditionError(InvalidConfigError):
    """The time step is too large for the inner fixed-point map to contract.

    The alternating linear-heat / nonlinear solve contracts only when
    dt < 1 + coercivity(alpha).  Violations are configuration errors, not
    runtime failures.
    """


class FieldShapeError(ValueError):
    """A nodal field does not match the operators or grid it is used with."""


class ExpressionError(ValueError):
    """An integrand or initial-data expression is outside the built-in grammar."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (column {position + 1})"
        super().__init__(message)
        self.position = position


class NumericalError(RuntimeError):
    """A linear or nonlinear solve failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


class NonConvergenceError(NumericalError):
    """An iteration hit its cap before meeting the requested tolerance."""


class ConfigValidationError(InvalidConfigError):
    """One or more validation failures in a run configuration file."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {v}" for v in self.violations))
