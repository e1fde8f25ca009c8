"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an evaluator."""


class ConfigError(ValueError):
    """A run configuration is malformed or violates a parameter window."""

    def __init__(self, messages):
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


class SolverError(RuntimeError):
    """A linear or nonlinear solve failed to converge."""


class StepError(SolverError):
    """A single implicit time step did not converge; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PositivityFault(SolverError):
    """Temperature became nonpositive at a quadrature point during a solve."""


class HypothesisError(ValueError):
    """Input series violates the hypothesis of a decay lemma check."""


class WindowError(ValueError):
    """A fitting window is empty or contains nonpositive values."""
