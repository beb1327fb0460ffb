"""Relativistic kinematics and the classical soft-photon emission current.

Conventions (fixed here, used everywhere):

* natural units, hbar = c = 1; energies are quoted in units of the
  incoming electron energy unless a config overrides them;
* metric signature (+, -, -, -);
* fine-structure constant alpha = 1/137.035999, electron charge
  e = sqrt(4 pi alpha);
* charged legs must be massive: the massless (collinear-divergent) limit
  is rejected at construction time rather than producing silent Inf.

The emission current of a charged leg scattering p -> p' evaluated at a
lightlike photon momentum k is

    J_mu(k) = i e (p_mu / (p.k) - p'_mu / (p'.k)),

a purely imaginary four-vector stored as four complex components.
Composite (multi-leg) currents are sums of adjacent-pair currents and
telescope to the endpoint current identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BelowThreshold,
    NonPositiveFrequency,
    NotLightlike,
    NotUnit,
)

ALPHA_FS = 1.0 / 137.035999
E_CHARGE = math.sqrt(4.0 * math.pi * ALPHA_FS)

ONSHELL_RTOL = 1e-9
CONSERVATION_RTOL = 1e-9
UNIT_TOL = 1e-12
LIGHTLIKE_RTOL = 1e-9


@dataclass(frozen=True)
class FourVector:
    """Contravariant four-vector (t, x, y, z), metric (+,-,-,-)."""

    t: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        for c in (self.t, self.x, self.y, self.z):
            if not math.isfinite(c):
                raise ValueError("four-vector components must be finite")

    @property
    def spatial(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def minkowski_sq(self) -> float:
        return minkowski_dot(self, self)

    def as_array(self) -> np.ndarray:
        return np.array([self.t, self.x, self.y, self.z])

    def __add__(self, other: "FourVector") -> "FourVector":
        return FourVector(self.t + other.t, self.x + other.x,
                          self.y + other.y, self.z + other.z)

    def __sub__(self, other: "FourVector") -> "FourVector":
        return FourVector(self.t - other.t, self.x - other.x,
                          self.y - other.y, self.z - other.z)

    def __mul__(self, s: float) -> "FourVector":
        return FourVector(self.t * s, self.x * s, self.y * s, self.z * s)

    __rmul__ = __mul__

    def boosted(self, beta: np.ndarray) -> "FourVector":
        """Components in a frame moving with velocity `beta` (passive boost)."""
        beta = np.asarray(beta, dtype=float)
        b2 = float(beta @ beta)
        if b2 >= 1.0:
            raise ValueError("|beta| < 1 required")
        if b2 == 0.0:
            return self
        gamma = 1.0 / math.sqrt(1.0 - b2)
        p = self.spatial
        bp = float(beta @ p)
        t_new = gamma * (self.t - bp)
        p_new = p + ((gamma - 1.0) * bp / b2 - gamma * self.t) * beta
        return FourVector(t_new, p_new[0], p_new[1], p_new[2])

    def rotated(self, rot: np.ndarray) -> "FourVector":
        """Apply a 3x3 rotation matrix to the spatial part."""
        p = np.asarray(rot, dtype=float) @ self.spatial
        return FourVector(self.t, p[0], p[1], p[2])


def minkowski_dot(a: FourVector, b: FourVector) -> float:
    """a.t*b.t - a.x*b.x - a.y*b.y - a.z*b.z."""
    return a.t * b.t - a.x * b.x - a.y * b.y - a.z * b.z


@dataclass(frozen=True)
class ParticleState:
    """On-shell particle: four-momentum plus its mass."""

    momentum: FourVector
    mass: float

    def __post_init__(self):
        if self.mass < 0.0:
            raise ValueError("mass must be non-negative")
        e = self.momentum.t
        if e <= 0.0:
            raise ValueError("energy component must be positive")
        off = abs(self.momentum.minkowski_sq() - self.mass * self.mass)
        if off > ONSHELL_RTOL * max(1.0, e * e):
            raise ValueError(
                f"state is off shell: |p^2 - m^2| = {off:.3e} at E = {e:g}"
            )

    @classmethod
    def from_three_momentum(cls, mass: float, p3) -> "ParticleState":
        p3 = np.asarray(p3, dtype=float)
        e = math.sqrt(mass * mass + float(p3 @ p3))
        return cls(FourVector(e, p3[0], p3[1], p3[2]), mass)

    @property
    def energy(self) -> float:
        return self.momentum.t


@dataclass(frozen=True)
class ScatteringEvent:
    """Elastic e-nu scattering outcome; photon recoil is neglected."""

    e_in: ParticleState
    nu_in: ParticleState
    e_out: ParticleState
    nu_out: ParticleState

    def __post_init__(self):
        pin = self.e_in.momentum + self.nu_in.momentum
        pout = self.e_out.momentum + self.nu_out.momentum
        scale = max(1.0, float(np.max(np.abs(pin.as_array()))))
        gap = np.max(np.abs(pin.as_array() - pout.as_array()))
        if gap > CONSERVATION_RTOL * scale:
            raise ValueError(f"four-momentum not conserved: max gap {gap:.3e}")


@dataclass(frozen=True)
class EmissionCurrent:
    """Charged leg scattering p_in -> p_out, the source of the photon cloud."""

    p_in: ParticleState
    p_out: ParticleState
    charge: float = E_CHARGE

    def __post_init__(self):
        if self.p_in.mass != self.p_out.mass:
            raise ValueError("emission current legs must share one mass")
        if self.p_in.mass <= 0.0:
            # massless legs would make the collinear region divergent
            raise ValueError("charged legs must be massive")


@dataclass(frozen=True)
class CompositeCurrent:
    """Ordered chain of charged legs; the current sums adjacent-pair currents."""

    legs: tuple[ParticleState, ...]
    charge: float = E_CHARGE

    def __post_init__(self):
        if len(self.legs) < 2:
            raise ValueError("composite current needs at least two legs")
        mass = self.legs[0].mass
        if mass <= 0.0:
            raise ValueError("charged legs must be massive")
        for leg in self.legs[1:]:
            if leg.mass != mass:
                raise ValueError("all chain legs must share one mass")


def _check_photon(k: FourVector) -> None:
    if k.t <= 0.0:
        raise NonPositiveFrequency(f"photon energy must be positive, got {k.t:g}")
    ksq = k.minkowski_sq()
    if abs(ksq) > LIGHTLIKE_RTOL * max(1.0, k.t * k.t):
        raise NotLightlike(f"k is not lightlike: k^2 = {ksq:.3e}")


def classical_current(current: EmissionCurrent, k: FourVector) -> np.ndarray:
    """Emission current J_mu(k) as a complex length-4 array (t, x, y, z)."""
    _check_photon(k)
    p = current.p_in.momentum
    pp = current.p_out.momentum
    pk = minkowski_dot(p, k)
    ppk = minkowski_dot(pp, k)
    return 1j * current.charge * (p.as_array() / pk - pp.as_array() / ppk)


def composite_current(chain: CompositeCurrent, k: FourVector) -> np.ndarray:
    """Sum of adjacent-pair currents along the chain."""
    _check_photon(k)
    total = np.zeros(4, dtype=complex)
    for a, b in zip(chain.legs[:-1], chain.legs[1:]):
        pk = minkowski_dot(a.momentum, k)
        ppk = minkowski_dot(b.momentum, k)
        total += 1j * chain.charge * (
            a.momentum.as_array() / pk - b.momentum.as_array() / ppk
        )
    return total


def sample_direction(rng: np.random.Generator) -> np.ndarray:
    """One direction drawn uniformly on the unit sphere."""
    return sample_directions(rng, 1)[0]


def sample_directions(rng: np.random.Generator, n: int) -> np.ndarray:
    """(n, 3) array of directions uniform on the sphere (batch form)."""
    u = rng.uniform(-1.0, 1.0, size=n)
    phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
    s = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
    return np.column_stack((s * np.cos(phi), s * np.sin(phi), u))


def cm_velocity(a: ParticleState, b: ParticleState) -> np.ndarray:
    """Velocity of the center-of-momentum frame of two states."""
    total = a.momentum + b.momentum
    return total.spatial / total.t


def elastic_final_state(
    e_in: ParticleState, nu_in: ParticleState, direction
) -> ScatteringEvent:
    """Elastic two-body final state, electron along `direction` in the CM frame.

    Raises BelowThreshold if the invariant mass does not exceed the mass sum,
    NotUnit if `direction` is not normalized to 1e-12.
    """
    direction = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(direction))
    if abs(norm - 1.0) > UNIT_TOL:
        raise NotUnit(f"|direction| = {norm!r} deviates from 1 beyond 1e-12")
    d = direction / norm

    total = e_in.momentum + nu_in.momentum
    m2 = total.minkowski_sq()
    me, mn = e_in.mass, nu_in.mass
    if m2 <= (me + mn) ** 2:
        raise BelowThreshold(
            f"invariant mass^2 {m2:g} <= threshold {(me + mn) ** 2:g}"
        )
    mtot = math.sqrt(m2)

    pstar = math.sqrt((m2 - (me + mn) ** 2) * (m2 - (me - mn) ** 2)) / (2.0 * mtot)
    e_e = (m2 + me * me - mn * mn) / (2.0 * mtot)
    e_n = mtot - e_e

    beta = total.spatial / total.t
    e_out_cm = FourVector(e_e, pstar * d[0], pstar * d[1], pstar * d[2])
    n_out_cm = FourVector(e_n, -pstar * d[0], -pstar * d[1], -pstar * d[2])
    e_out = ParticleState(e_out_cm.boosted(-beta), me)
    nu_out = ParticleState(n_out_cm.boosted(-beta), mn)
    return ScatteringEvent(e_in, nu_in, e_out, nu_out)
