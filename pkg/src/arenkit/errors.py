"""Exception hierarchy shared by all arenkit modules."""


class ArenError(Exception):
    """Base class for every error raised by arenkit."""


class SpecError(ArenError, ValueError):
    """An MPC problem instance violates a structural requirement."""


class DimensionMismatch(SpecError):
    pass


class NonPositiveDefiniteH(SpecError):
    """The condensed Hessian (or the input weight R feeding it) is not PD."""


class NoConvergence(ArenError, RuntimeError):
    pass


class NumericalBreakdown(ArenError, RuntimeError):
    """The simplex engine exceeded its pivot budget or produced an invalid answer."""


class NotInfeasible(ArenError, ValueError):
    pass


class ShapeMismatch(ArenError, ValueError):
    pass


class EmptySubset(ArenError, ValueError):
    pass


class TooManyConstraints(ArenError, ValueError):
    pass


class CoverageGap(ArenError, RuntimeError):
    """A sample of the feasible set lies in no enumerated critical region."""


class QPInfeasible(ArenError, ValueError):
    """No input sequence satisfies the constraints at the requested state."""
