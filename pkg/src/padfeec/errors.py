"""Exception types shared across the package."""


class PadfeecError(Exception):
    """Base class for all package errors."""


class InvalidMatrix(PadfeecError):
    """Matrix contains non-finite entries or has inconsistent shape."""


class InvalidGram(PadfeecError):
    """A Gram matrix is not symmetric positive definite where required."""


class NotClosedRange(PadfeecError):
    """Restricted stiffness is degenerate; tolerance could not separate the kernel."""


class NotNested(PadfeecError):
    """Subspace inclusion required but not satisfied at tolerance."""


class DegreeOverflow(PadfeecError):
    """Form degree exceeds what the operation supports."""


class DegreeUnderflow(PadfeecError):
    """Form degree is below what the operation supports."""


class DegreeMismatch(PadfeecError):
    """Two forms must have matching degree but do not."""


class Unsupported(PadfeecError):
    """Operation not available for the given dimension or configuration."""


class InvalidParameter(PadfeecError):
    """Bad user-facing parameter (mesh sizes, domains, tolerances)."""


class MeshError(PadfeecError):
    """Mesh is not a valid conforming simplicial complex."""


class NotAdmissible(PadfeecError):
    """Domain does not contain the mutual-annihilator core of the base pair."""


class NotAComplex(PadfeecError):
    """Range of the lower operator is not contained in the kernel of the upper one."""


class AssumptionViolation(PadfeecError):
    """A structural hypothesis (local independence, well-posed local system) failed."""


class ToleranceFailure(PadfeecError):
    """Rank detection is ambiguous at the configured tolerance."""


class SolverFailure(PadfeecError):
    """A linear solve did not reach the required residual."""


class AssemblyError(PadfeecError):
    """Inconsistent block sizes or incompatible spaces during assembly."""
