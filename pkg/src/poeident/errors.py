"""Exception types shared across the library."""


class PoeIdentError(Exception):
    """Base class for library-specific failures."""


class TrivialModel(PoeIdentError):
    """The first moment is zero, so the model carries no information."""


class MissingMoment(PoeIdentError):
    """A required moment index is absent from the sequence."""


class InfeasibleXY(PoeIdentError):
    """An (x, y) point has no probabilistic factor pre-image."""


class BackendMismatch(PoeIdentError):
    """Operands use different (or unsupported) numeric backends."""


class InterlacingViolation(PoeIdentError):
    """A predicted root bracket failed its sign condition."""


class NonExactDivision(PoeIdentError):
    """A polynomial division expected to be exact left a remainder."""


class UncertifiableMultiplicity(PoeIdentError):
    """A root interval could not be matched to an exact factor."""


class SingularLeadingBlock(PoeIdentError):
    """The leading square block of a multiplicity matrix is singular."""


class EpsilonCascadeFailure(PoeIdentError):
    """Perturbed-point selection could not satisfy the shrinking tolerances."""


class SingularAtChosenPoint(PoeIdentError):
    """The scaled Jacobian was singular at the selected evaluation point."""


class ConstantPolynomialInFamily(PoeIdentError):
    """A requested family member is constant and has no usable root."""


class NoConvergence(PoeIdentError):
    """No solver start converged; carries the best residual seen."""

    def __init__(self, message: str, best_residual: float | None = None):
        super().__init__(message)
        self.best_residual = best_residual


class InfeasibleRoot(PoeIdentError):
    """A converged solution lies outside the feasible parameter region."""


class RankNotDeficient(PoeIdentError):
    """The Hankel matrix has full numerical rank at the requested support size."""


class DimensionMismatch(PoeIdentError):
    """Operands describe models with different numbers of factors."""
