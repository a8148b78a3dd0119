"""Exception hierarchy shared by every solver and constructor."""


class DroPathError(Exception):
    """Base class for all library errors."""


class NoPath(DroPathError):
    """The sink cannot be reached from the source."""


class NegativeCycle(DroPathError):
    """Negative arc costs on a graph that contains a negative-cost cycle."""


class CapExceeded(DroPathError):
    """More simple paths exist than the enumeration cap allows."""


class A2Violation(DroPathError):
    """A left endpoint of one baseline subinterval equals a right endpoint of another.

    Attributes
    ----------
    endpoints : list of float
        The clashing endpoint values, sorted.
    pairs : list of tuple
        Index pairs ``(i1, i2)`` with ``lo[i1] == hi[i2]``.
    """

    def __init__(self, endpoints, pairs, arc=None):
        self.endpoints = sorted(set(endpoints))
        self.pairs = list(pairs)
        self.arc = arc
        where = "" if arc is None else f"arc {arc}: "
        shown = ", ".join(f"{e:g}" for e in self.endpoints)
        super().__init__(f"{where}subinterval endpoints clash at {shown}")


class A1Infeasible(DroPathError):
    """No marginal distribution satisfies the quantile constraints (strictly where required)."""

    def __init__(self, message, arc=None):
        self.arc = arc
        where = "" if arc is None else f"arc {arc}: "
        super().__init__(where + message)


class SampleOutOfSupport(DroPathError):
    """An observed total lies outside its declared support."""


class UnresolvableSample(DroPathError):
    """Interval-membership flags that no cost value can produce."""


class NumericalFailure(DroPathError):
    """The simplex method hit its pivot limit or lost numerical stability."""


class RequiresMip(DroPathError):
    """The polynomial method was asked to handle linear expectation rows."""


class AmbiguityInfeasible(DroPathError):
    """The polyhedron of admissible expected costs is empty."""


class NodeLimit(DroPathError):
    """Branch-and-bound exhausted its node budget before closing the gap."""

    def __init__(self, message, incumbent=None):
        self.incumbent = incumbent
        super().__init__(message)
