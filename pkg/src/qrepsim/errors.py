"""Exception types shared across the package."""


class QrepsimError(Exception):
    """Base class for all package errors."""


class DomainError(QrepsimError, ValueError):
    """An argument lies outside the domain of a formula."""


class DegenerateInputError(QrepsimError, ValueError):
    """The inputs make a ratio 0/0 or otherwise undefined."""


class BoundsError(QrepsimError, ValueError):
    """Search bounds are empty or nonpositive."""


class BudgetError(QrepsimError, ValueError):
    """A circuit needs more qubits than the exact simulator supports."""


class ImpossibleOutcome(QrepsimError):
    """A postselected measurement branch has zero probability."""

    def __init__(self, qubit: int, outcome: int):
        super().__init__(f"outcome {outcome} on qubit {qubit} has zero probability")
        self.qubit = qubit
        self.outcome = outcome


class ConfigError(QrepsimError, ValueError):
    """A scenario or topology document failed validation."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path or '<root>'}: {reason}")
        self.path = path
        self.reason = reason


class SchedulingError(QrepsimError, RuntimeError):
    """An event was scheduled before the current simulation time."""


class HandlerError(QrepsimError, RuntimeError):
    """An event handler raised; wraps the original exception."""

    def __init__(self, event, original: BaseException):
        super().__init__(f"handler failed on {event!r}: {original!r}")
        self.event = event
        self.original = original


class RoutingError(QrepsimError, LookupError):
    """No path exists between two nodes."""


class RunError(QrepsimError, RuntimeError):
    """One (strategy, seed) instance of a scenario failed."""

    def __init__(self, strategy: str, seed: int, original: BaseException):
        super().__init__(f"strategy={strategy} seed={seed}: {original!r}")
        self.strategy = strategy
        self.seed = seed
        self.original = original
