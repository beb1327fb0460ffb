"""Exception types shared across the library.

Every domain error derives from SoftbremsError so callers (and the CLI,
which maps them to exit code 3) can catch one base class.
"""


class SoftbremsError(Exception):
    """Base class for domain errors raised by this package."""


class BelowThreshold(SoftbremsError):
    """Invariant mass too small for the requested two-body final state."""


class NotUnit(SoftbremsError):
    """Direction vector is not normalized within tolerance."""


class NotLightlike(SoftbremsError):
    """Photon momentum fails the k**2 = 0 check."""


class NonPositiveFrequency(SoftbremsError):
    """Photon energy component must be strictly positive."""


class NegativeBeyondTolerance(SoftbremsError):
    """Polarization sum came out negative: the input current is not conserved."""


class WindowTooNarrow(SoftbremsError):
    """Cutoff window spans fewer decades than the fit protocol requires."""


class ThresholdOutOfRange(SoftbremsError):
    """Detector threshold lies outside the spectral window."""


class TruncationTooSmall(SoftbremsError):
    """Per-mode level cap violates the occupation-tail bound."""


class GridMismatch(SoftbremsError):
    """States were built on different mode grids or level caps."""


class NotHermitian(SoftbremsError):
    """Observable spec is not self-adjoint."""


class DimensionMismatch(SoftbremsError):
    """Branch set and decoherence matrix sizes disagree."""


class InvalidTolerance(SoftbremsError):
    """Angular tolerance must lie in (0, 1]."""
