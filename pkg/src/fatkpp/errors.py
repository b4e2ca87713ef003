"""Exception types shared across the package.

Every failure mode that callers are expected to branch on gets its own
class here; anything else is allowed to surface as a plain ValueError
from numpy/scipy.
"""


class FatKppError(Exception):
    """Base class for all package-specific errors."""


class InvalidParams(FatKppError):
    """Kernel family parameters outside their admissible range."""


class DomainError(FatKppError):
    """Function evaluated outside its mathematical domain."""


class ThinTailedKernel(FatKppError):
    """A fat-tail-only operation was requested on a thin-tailed kernel."""


class NotMutationEligible(FatKppError):
    """Kernel lacks the small-jump regularity the mutation regime needs."""


class NonIntegrableTail(FatKppError):
    """A tail integral required by the requested quantity diverges."""


class GridMismatch(FatKppError):
    """Two discrete objects live on different grids."""


class GridTooCoarse(FatKppError):
    """Grid spacing cannot resolve the requested kernel or regime."""


class NoConvergence(FatKppError):
    """Adaptive quadrature or root solve failed to reach tolerance."""


class StabilityViolation(FatKppError):
    """Time stepping produced values outside the invariant region."""


class CFLViolation(FatKppError):
    """Requested time step exceeds the scheme's stability bound."""


class GradientOutOfRange(FatKppError):
    """Numerical gradient left the range the Hamiltonian table covers."""


class BoundaryContamination(FatKppError):
    """Solution mass reached the truncated domain boundary.

    The partially completed run is attached as ``.run`` so callers can
    still write out what was computed before the abort.
    """

    def __init__(self, message, run=None):
        super().__init__(message)
        self.run = run


class ValidationError(FatKppError):
    """Configuration rejected; ``.issues`` lists every problem found."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


class OutOfDomain(FatKppError):
    """A rescaled coordinate landed outside the computed domain."""


class ParseError(FatKppError):
    """Configuration file is not well-formed (syntax, not semantics)."""


class IoError(FatKppError):
    """Refusing to write an ill-formed artifact (e.g. empty plot)."""
