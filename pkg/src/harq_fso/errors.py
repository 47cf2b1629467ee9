"""Exception types shared across the package."""


class HarqFsoError(Exception):
    """Base class for all package errors."""


class DomainError(HarqFsoError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConvergenceError(HarqFsoError, ArithmeticError):
    """A truncated series did not converge within its term budget."""

    def __init__(self, message, partial_sum=float("nan"), last_term=float("nan")):
        super().__init__(
            f"{message} (partial sum={partial_sum!r}, last term magnitude={abs(last_term)!r})"
        )
        self.partial_sum = partial_sum
        self.last_term = last_term


class SolverError(HarqFsoError, ArithmeticError):
    """The convex solver failed (infeasible subproblem or barrier divergence)."""

    def __init__(self, message, **diagnostics):
        details = ", ".join(f"{k}={v!r}" for k, v in diagnostics.items())
        super().__init__(f"{message} [{details}]" if details else message)
        self.diagnostics = diagnostics


class FeasibilityError(SolverError):
    """No strictly feasible starting allocation could be constructed."""


class ConfigError(HarqFsoError, ValueError):
    """A run configuration is invalid; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
