"""Exception hierarchy.

Every error raised on purpose by the package derives from ``FloqError`` so
callers (the CLI in particular) can map families of failures onto exit codes.
"""


class FloqError(Exception):
    """Base class for package errors."""


class ConfigError(FloqError, ValueError):
    """Invalid experiment configuration or model parameters."""


class BasisError(FloqError, ValueError):
    """Problems constructing the occupation basis or its symmetry orbits."""


class CoprimalityViolation(BasisError):
    """Raised for N > 1 when gcd(L, N) != 1 (orbits would have unequal sizes)."""


class OverflowRisk(BasisError):
    """The basis dimension exceeds the configured cap."""


class OrbitSizeError(BasisError):
    """A co-translation orbit does not contain exactly L states."""


class NotASeed(BasisError):
    """The state is not a registered orbit representative."""


class BoundaryError(FloqError, ValueError):
    """Operation requires periodic boundary conditions."""


class WrongParticleNumber(FloqError, ValueError):
    """Operation is defined for a different particle number."""


class NumericalError(FloqError, ArithmeticError):
    """Base for numerical failures (exit code 3 in the CLI)."""


class ConvergenceError(NumericalError):
    """Time-slice refinement moved eigenphases by more than the tolerance."""


class GapClosure(NumericalError):
    """A band group is not spectrally isolated somewhere on the grid."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NonIntegerResult(NumericalError):
    """Plaquette sum did not land on an integer."""


class NormDriftError(NumericalError):
    """Wavepacket norm drifted beyond tolerance during evolution."""


class BoundaryContamination(FloqError, RuntimeError):
    """Wavepacket density reached the edge of the simulation lattice."""

    def __init__(self, message, period=None):
        super().__init__(message)
        self.period = period


class ContinuationAmbiguity(UserWarning):
    """Band continuation overlap fell below 0.5 (near-degeneracy); not fatal."""
