"""Exception hierarchy shared by all modules."""


class QuasisymError(Exception):
    """Base class for library errors."""


class UsageError(QuasisymError, ValueError):
    """Invalid argument or violated precondition."""


class DomainError(QuasisymError, ValueError):
    """A derivative was requested where it does not exist."""


class OutOfRangeError(QuasisymError, ValueError):
    """Value outside a tabulated interval."""

    def __init__(self, value, lo, hi, what="value"):
        self.value = value
        self.interval = (lo, hi)
        super().__init__(f"{what} {value!r} outside the valid interval [{lo:.12g}, {hi:.12g}]")


class IntegrationError(QuasisymError, ArithmeticError):
    """ODE integration produced a non-finite state."""


class ConvergenceError(QuasisymError, RuntimeError):
    """A nonlinear solve or root search did not converge."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class ShootingOverflowError(ConvergenceError):
    """Shooting trajectory blew up before reaching the outer radius."""


class NotFoundError(QuasisymError, LookupError):
    """A scan finished without locating the requested quantity."""
