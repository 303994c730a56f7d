"""Exception types shared across the simulation modules."""


class Kpz2dError(Exception):
    """Base class for all package errors."""


class EpsilonOutOfRange(Kpz2dError):
    """Mollification scale outside (0, 1)."""


class EpsilonUnresolvable(Kpz2dError):
    """Mollifier support too small for the grid spacing (epsilon < 4*dx)."""


class EpsilonTooLarge(Kpz2dError):
    """Operation requires epsilon < 1/4."""


class StabilityViolation(Kpz2dError):
    """Solver configuration breaks the scheme's stability constraint."""


class Blowup(Kpz2dError):
    """Field exceeded the divergence guard or became non-finite.

    Carries the step index at which the guard tripped.
    """

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"field blow-up at step {step}")


class NonpositiveField(Kpz2dError):
    """Logarithm of a field with nonpositive entries."""


class MissingKappa(Kpz2dError):
    """Renormalization constant not supplied for a snapshot time."""


class IndexOutOfRange(Kpz2dError):
    """Slice or snapshot index outside the stored range."""


class GridMisaligned(Kpz2dError):
    """Path time grid does not match the noise realization's grid."""


class DegenerateWeights(Kpz2dError):
    """Self-normalized weights collapsed (effective sample size < 10)."""


class HorizonMismatch(Kpz2dError):
    """Path horizon differs from the t = 1 convention of the mode integrals."""


class ScaleUnresolvable(Kpz2dError):
    """Scaled test function narrower than twice the grid spacing."""


class UnsupportedP(Kpz2dError):
    """Exact moment evaluation only implemented for p <= 2."""


class ConfigError(Kpz2dError):
    """Experiment configuration failed validation."""
