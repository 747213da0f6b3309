"""Shared domain types: physical setup, quadratic-family potentials, damping regimes.

The toolkit works with a particle of mass ``m`` moving in one dimension
through a linearly damping medium with mean friction rate ``gamma``
(Caldirola-Kanai model).  Everything downstream supports exactly three
potentials, the quadratic-or-lower family for which a Gaussian wave packet
stays Gaussian:

* free space, ``V = 0``
* linear ramp, ``V(x) = -m*a*x`` (``a > 0`` is the canonical orientation)
* harmonic well, ``V(x) = m*omega0**2*x**2/2``

All values here are immutable and every function is pure, so they can be
shared freely across workers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

__all__ = [
    "SimulationError",
    "NonNormalizableError",
    "SingularStateError",
    "FreePotential",
    "LinearPotential",
    "HarmonicPotential",
    "PotentialSpec",
    "PhysicalSetup",
    "Damping",
    "DampingRegime",
    "classify_regime",
    "potential_eval",
]


class SimulationError(Exception):
    """Base class for numerical failures raised by the propagators."""


class NonNormalizableError(SimulationError):
    """The Gaussian shape parameter lost its positive imaginary part."""


class SingularStateError(SimulationError):
    """A closed-form shape evolution hit a pole of its Riccati flow."""

    def __init__(self, message: str, pole_time: float | None = None):
        super().__init__(message)
        self.pole_time = pole_time


@dataclass(frozen=True)
class FreePotential:
    """V(x) = 0."""


@dataclass(frozen=True)
class LinearPotential:
    """V(x) = -m*a*x.

    ``slope`` is the acceleration parameter ``a``.  The sign convention puts
    the force along +x for ``a > 0``; other signs work but are flagged with a
    warning because every closed-form expression assumes ``a > 0``.
    """

    slope: float

    def __post_init__(self):
        if self.slope <= 0.0:
            warnings.warn(
                "linear potential with slope a <= 0: accepted, but the "
                "canonical orientation is a > 0",
                UserWarning,
                stacklevel=2,
            )


@dataclass(frozen=True)
class HarmonicPotential:
    """V(x) = m*omega0**2*x**2/2 with omega0 > 0."""

    omega0: float

    def __post_init__(self):
        if self.omega0 <= 0.0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")


PotentialSpec = Union[FreePotential, LinearPotential, HarmonicPotential]


@dataclass(frozen=True)
class PhysicalSetup:
    """Global simulation context: mass, hbar, friction rate and potential.

    ``gamma = 0`` must reproduce frictionless physics in every downstream
    operation; that regression is part of the test contract.  Units are
    abstract (the natural choice is m = hbar = 1).
    """

    mass: float = 1.0
    hbar: float = 1.0
    gamma: float = 0.0
    potential: PotentialSpec = field(default_factory=FreePotential)

    def __post_init__(self):
        if self.mass <= 0.0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.hbar <= 0.0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")


class Damping(Enum):
    UNDERDAMPED = "underdamped"
    CRITICAL = "critical"
    OVERDAMPED = "overdamped"


@dataclass(frozen=True)
class DampingRegime:
    """Damped-oscillator regime of a harmonic setup.

    ``rate`` is Omega = sqrt(omega0**2 - (gamma/2)**2) in the underdamped
    case, Gamma = sqrt((gamma/2)**2 - omega0**2) in the overdamped case and
    0 at criticality.  ``phase`` is the underdamped dephasing angle
    arctan(gamma / 2*Omega) and 0 otherwise.
    """

    kind: Damping
    rate: float
    phase: float = 0.0


# Relative half-width of the criticality band.  Exact case distinctions do
# not survive floating point; a relative band keeps classification scale-free.
_CRITICAL_RTOL = 1e-12


def classify_regime(setup: PhysicalSetup) -> DampingRegime:
    """Classify a harmonic setup as under-, critically or overdamped.

    Raises ``ValueError`` if the potential is not harmonic.  The result is
    invariant under joint rescaling (omega0, gamma) -> (c*omega0, c*gamma).
    """
    if not isinstance(setup.potential, HarmonicPotential):
        raise ValueError("damping regimes are defined for harmonic potentials only")
    omega0 = setup.potential.omega0
    half_gamma = setup.gamma / 2.0
    if abs(omega0 - half_gamma) <= _CRITICAL_RTOL * max(omega0, half_gamma):
        return DampingRegime(Damping.CRITICAL, 0.0)
    if omega0 > half_gamma:
        rate = math.sqrt(omega0**2 - half_gamma**2)
        return DampingRegime(Damping.UNDERDAMPED, rate, math.atan2(half_gamma, rate))
    return DampingRegime(Damping.OVERDAMPED, math.sqrt(half_gamma**2 - omega0**2))


def potential_eval(spec: PotentialSpec, m: float, x: float):
    """Evaluate V(x) together with its first two derivatives.

    Returns the tuple ``(V, V', V'')``.  For the supported quadratic family
    the second-order Taylor expansion built from these values is exact at
    any expansion point.
    """
    if isinstance(spec, FreePotential):
        return 0.0, 0.0, 0.0
    if isinstance(spec, LinearPotential):
        return -m * spec.slope * x, -m * spec.slope, 0.0
    if isinstance(spec, HarmonicPotential):
        k = m * spec.omega0**2
        return 0.5 * k * x * x, k * x, k
    raise TypeError(f"unsupported potential spec: {spec!r}")
