"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of an operation."""


class SolverError(RuntimeError):
    """A root bracket could not be found."""


class NumericalError(ArithmeticError):
    """A closed-form evaluation produced an invalid intermediate."""


class IntegrationError(RuntimeError):
    """The fixed-step integrator hit a non-finite state or a bad step."""
