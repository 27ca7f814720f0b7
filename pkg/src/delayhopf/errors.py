"""Exception hierarchy.

Errors are split by what the caller can do about them: ``MathematicalRefusal``
means the input lies outside the region where the analysis applies (the CLI
maps it to exit code 2), ``InternalInconsistency`` means a numerical
certificate failed where theory says it cannot (exit code 3).
"""


class DelayHopfError(Exception):
    """Base class for all package errors."""


class DomainError(DelayHopfError, ValueError):
    """Non-finite input or a parameter outside an operation's domain."""


class MathematicalRefusal(DelayHopfError):
    """The parameters are valid but the requested analysis does not apply."""


class UnsupportedSingleDelay(MathematicalRefusal):
    """bc = 0: the equation degenerates to a single-delay equation."""


class NoWindow(MathematicalRefusal):
    """(|b|+|c|)^2 <= a^2, so no purely imaginary root can exist."""


class NoCrossing(MathematicalRefusal):
    """No sign change of the crossing residual inside the frequency window."""


class TangencyAtFirstRoot(MathematicalRefusal):
    """The first root of the crossing residual is a double root."""


class TauTooLarge(MathematicalRefusal):
    """|tau| >= tau*, so uniqueness of the crossing is not guaranteed."""


class BoundaryParameters(MathematicalRefusal):
    """Parameters sit exactly on a regime boundary."""


class NoPositiveEquilibrium(MathematicalRefusal):
    """The model only has the zero equilibrium."""


class NearSingularExpansion(MathematicalRefusal):
    """Taylor coefficients involve negative powers of a vanishing equilibrium."""


class ContourRootCollision(DelayHopfError):
    """A characteristic root lies on (or too near) the counting contour."""


class InternalInconsistency(DelayHopfError):
    """A certificate that theory guarantees has failed numerically."""


class InconsistentCrossing(InternalInconsistency):
    """The delay-recovery vector is not a unit vector: omega is not a root."""


class NonUniqueCrossing(InternalInconsistency):
    """A second crossing frequency was found although |tau| < tau*."""


class DegenerateDerivative(InternalInconsistency):
    """The denominator of the transversality quotient vanished."""


class ResonanceDegeneracy(MathematicalRefusal):
    """A normal-form denominator vanishes (resonance)."""


class StepExceedsDelay(DelayHopfError, ValueError):
    """The integration step would read delayed values not yet computed."""


class BlowUp(DelayHopfError, ArithmeticError):
    """The numerical solution became non-finite."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"non-finite state at t={t:.6g}")
