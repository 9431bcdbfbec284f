"""Exception hierarchy shared by the solver, the oracles and the CLI."""


class HKGameError(Exception):
    """Base class for every error raised by this package."""


class ParseError(HKGameError, ValueError):
    pass


class SelfLoopError(HKGameError, ValueError):
    pass


class DisconnectedError(HKGameError, ValueError):
    pass


class EmptyNeighborhoodError(HKGameError):
    """An agent has no neighbour inside its confidence bound.

    ``agent`` is the offending index; ``time`` is filled in by the
    receding-horizon driver when known.
    """

    def __init__(self, agent, time=None):
        self.agent = agent
        self.time = time
        where = "" if time is None else f" at t={time:g}"
        super().__init__(f"agent {agent} has an empty confidence neighbourhood{where}")


class NonFiniteError(HKGameError, FloatingPointError):
    pass


class DomainError(HKGameError, ValueError):
    pass


class SingularMatrixError(HKGameError, ArithmeticError):
    pass


class GridTooCoarseError(HKGameError, ValueError):
    pass


class NoFeasibleEpsError(HKGameError):
    pass


class ConfigError(HKGameError, ValueError):
    """Invalid scenario configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
