class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class GuardError(RuntimeError):
    """A numerical validity guard (boundary smallness, tail size) was breached."""


class ConvergenceError(RuntimeError):
    """Picard iteration did not reach its tolerance within the iteration cap."""
