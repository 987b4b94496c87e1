"""Exception types raised by the solver."""


class RabiSpecError(Exception):
    """Base class for all solver errors."""


class PoleAtInteger(RabiSpecError, ValueError):
    """Evaluation requested too close to an integer pole of the recurrence."""

    def __init__(self, x, n, guard):
        self.x = x
        self.n = n
        self.guard = guard
        super().__init__(f"x={x!r} lies within {guard:g} of the pole at {n}")


class NoConvergence(RabiSpecError, RuntimeError):
    pass


class IndeterminateSign(RabiSpecError, ArithmeticError):
    """|G| stayed below three times its error estimate at maximum precision."""


class LostBracket(RabiSpecError, RuntimeError):
    pass


class OutsideDomain(RabiSpecError, ValueError):
    pass


class CutoffExplosion(RabiSpecError, RuntimeError):
    pass


class ConvergenceFailure(RabiSpecError, RuntimeError):
    pass


class PreconditionViolated(RabiSpecError, ValueError):
    pass


class TrackingAmbiguity(RabiSpecError, RuntimeError):
    """Adjacent-point level matching was not unique inside the match window."""
