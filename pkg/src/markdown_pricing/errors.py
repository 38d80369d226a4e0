"""Exception hierarchy shared by every module."""


class MarkdownPricingError(Exception):
    pass


class ParameterError(MarkdownPricingError, ValueError):
    """An argument lies outside the range an operation accepts."""


class DomainError(ParameterError):
    """A price lies outside the model's price domain."""


class ConditioningError(MarkdownPricingError, ArithmeticError):
    """Singular or near-singular interpolation system."""


class InconsistencyError(MarkdownPricingError, ValueError):
    """Observed values cannot come from any parameter near the box."""


class ModelViolationError(MarkdownPricingError, ValueError):
    """A model breaks an assumption the caller required (e.g. interior optimum)."""


class ConfigurationError(MarkdownPricingError, ValueError):
    """An experiment or policy configuration is infeasible."""


class InvariantViolation(MarkdownPricingError, AssertionError):
    """A hard invariant (e.g. markdown monotonicity) was broken at runtime."""


class FitError(MarkdownPricingError, ValueError):
    pass


class ConfigFormatError(MarkdownPricingError, ValueError):
    """A config file or flag set is malformed (bad key, value or section)."""
