"""Exception types shared across the package."""


class TubegeomError(Exception):
    """Base class for all package errors."""


class DomainError(TubegeomError):
    """Evaluation hit a singularity (division by zero, log of a non-positive value, ...)."""


class ArityError(TubegeomError):
    """Coordinate tuple has the wrong length for the expression."""


class ParseError(TubegeomError):
    """Expression text could not be parsed."""


class SingularMetric(TubegeomError):
    """Metric matrix is not positive definite at the requested point."""


class DomainExit(TubegeomError):
    """A path left the chart's domain box."""


class MissingBaseACS(TubegeomError):
    """Operation requires an almost complex structure on the base manifold."""


class NotOrthonormal(TubegeomError):
    """Input vectors fail the unit-norm requirement."""


class BadCase(TubegeomError):
    """Case index outside 1..8."""


class OutsideDomain(TubegeomError):
    """Point lies outside the chart's domain box."""


class BoundaryGuardViolation(TubegeomError):
    """Point is too close to a non-smooth region interface for finite differencing."""


class EmptyInnerTube(TubegeomError):
    """Tube radius leaves no room for an inner region inside the domain box."""


class ManifestError(TubegeomError):
    """Manifold manifest is missing, malformed, or violates its invariants."""


class UnknownSuite(TubegeomError):
    """Suite id is not one of the registered verification suites."""


class InvariantViolation(TubegeomError):
    """A manifold failed its own type invariants before the suite ran."""
