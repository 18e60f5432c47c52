"""Exception types raised by the numerical routines."""


class M2HSError(Exception):
    """Base class for all package errors."""


class NonMonotone(M2HSError):
    """A map that should be a diffeomorphism has a non-positive derivative."""


class NearZero(M2HSError):
    """A wave function comes too close to zero for a pointwise phase."""


class ZeroVelocity(M2HSError):
    """A tangent vector with zero norm was given where a direction is needed."""


class DegenerateAngle(M2HSError):
    """The contact angle is too close to 0 or pi."""


class NotInContactPlane(M2HSError):
    """A tangent vector is not annihilated by the contact form."""


class UnknownGenerator(M2HSError, IndexError):
    """Index outside the finite family of multiplication generators."""


class NotClosed(M2HSError):
    """A sampled loop does not return to its starting point."""


class OffSphere(M2HSError):
    """A sampled point does not have unit norm."""


class InsufficientSamples(M2HSError):
    """Too few time samples for a centered difference."""


class BlowupEncountered(M2HSError):
    """The Eulerian integrator lost regularity.

    The partial trajectory up to the last good step is kept in ``trajectory``.
    """

    def __init__(self, message, time=None, trajectory=None):
        super().__init__(message)
        self.time = time
        self.trajectory = trajectory


class ConfigError(M2HSError):
    """Invalid experiment configuration."""
