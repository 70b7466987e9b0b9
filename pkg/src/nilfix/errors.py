"""Exception types shared across the package.

Every failure that a caller can act on gets its own class so that
pipelines can distinguish "the input is bad" from "the method ran out
of budget" from "a hypothesis of the underlying estimate is violated".
"""

from __future__ import annotations


class NilfixError(Exception):
    """Base class for all package errors."""


class BoundDiverges(NilfixError):
    """A propagated Lipschitz bound reached or exceeded 1 where < 1 is required."""


class NonConvergence(NilfixError):
    """An iteration hit its cap before meeting its tolerance."""


class DegenerateInput(NilfixError):
    """Geometric input collapsed (zero-length segment, empty set, ...)."""


class PreconditionViolated(NilfixError):
    """A stated hypothesis of the check does not hold for the given input."""


class SizeCap(NilfixError):
    """A combinatorial enumeration exceeded its configured size cap."""


class UnboundedOrbit(NilfixError):
    """An orbit left the configured escape radius."""


class OnCurve(NilfixError):
    """The query point is within the guard distance of the curve."""


class AlreadySimple(NilfixError):
    """Simple-loop extraction was asked for a loop with no self-intersection."""


class FixedPointOnCurve(NilfixError):
    """The displacement field vanishes (below floor) at a sampled curve point."""


class RefinementCap(NilfixError):
    """Adaptive refinement exceeded its budget without settling."""


class SearchFailed(NilfixError):
    """No fixed point satisfying the certificate could be produced."""


class StageFailed(NilfixError):
    """A stage of the multi-map location pipeline failed its inclusion check."""


class PolynomialityViolated(NilfixError):
    """A field that must be polynomial is not, for the given parameters."""


class StepFailure(NilfixError):
    """The integrator could not meet its error target with a sane step size."""


class RegionEscape(NilfixError):
    """A trajectory left the configured trust region."""


class OrderTooLow(NilfixError):
    """A jet or vanishing order is below the required minimum."""


class DegreeMismatch(NilfixError):
    """Two truncated objects with different truncation degrees were combined."""


class NotTangentToIdentity(NilfixError):
    """A jet whose linear part must be the identity has some other linear part."""


class DynkinMismatch(NilfixError):
    """The series-form product log disagrees with the compositional one."""


class ConfigInvalid(NilfixError):
    """An experiment configuration failed validation."""


class MissingArtifact(NilfixError):
    """A report was requested for a directory lacking the expected artifacts."""


class EmptyFixSetWarning(UserWarning):
    """No approximate fixed points were found where some were expected."""
