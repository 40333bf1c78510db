"""Exception types shared across the package.

Every failure mode that callers are expected to catch gets its own class
here, so that library code never raises a bare ``ValueError`` for a
condition the CLI maps to a dedicated exit code.
"""

from __future__ import annotations


class TransportError(Exception):
    """Base class for all package-specific errors."""


class ConfigInvalid(TransportError):
    """A run configuration failed validation."""


class ZeroVelocity(TransportError):
    """An operation that needs a direction was given the zero velocity."""


class OutsideDomain(TransportError):
    """A spatial point lies outside the closure of the domain."""


class GridMismatch(TransportError):
    """Two grid-sampled objects live on different grids."""


class TagMismatch(TransportError):
    """A trace function was used on the wrong side of the boundary."""


class NearSingular(TransportError):
    """A closed-form inverse was requested too close to its singular set."""


class GrazingChord(TransportError):
    """A chord is too short for the requested frequency evaluation."""


class EmptyCloud(TransportError):
    """A sampling cloud ended up with no usable points."""


class ResourceLimit(TransportError):
    """A computation would exceed a configured size or memory cap."""


class BadSupport(TransportError):
    """A kernel factor is supported outside the admissible speed annulus."""


class NonHomogeneousSigma(TransportError):
    """An explicit formula valid only for space-homogeneous collision
    frequencies was invoked with a space-dependent one."""


class NumericalFailure(TransportError):
    """An iterative or quadrature computation failed to converge."""
