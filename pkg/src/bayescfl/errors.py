"""Exception types shared across the package."""


class ContractError(ValueError):
    """An argument violates a documented precondition (shape, range, finiteness)."""


class NumericalError(RuntimeError):
    """Base class for runtime numerical failures (CLI exit code 2)."""


class SingularModelError(NumericalError):
    """The Hessian at a Laplace mode is not positive-definite."""


class FusionDegenerateError(NumericalError):
    """A fused precision matrix is not positive-definite."""


class DegenerateHypothesisSetError(NumericalError):
    """Every hypothesis in a set has log-weight -inf; no normalization exists."""


class ConfigError(ValueError):
    """A run configuration file is missing, unreadable, or invalid (CLI exit code 1)."""
