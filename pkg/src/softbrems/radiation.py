"""Continuum functionals of the soft-photon cloud.

All quantities are deterministic quadratures over the photon phase space
with measure dk~ = d^3k / k0 = omega domega dOmega:

* spectral density  dN/domega = omega * Int dOmega S(J(omega n)),
* mean photon number  N = Int domega dN/domega  over a cutoff window,
* cloud norm functional  V(J) = 1/2 Int dk~ |J|^2  and its pairwise
  difference form V(J_l - J_m),
* overlap magnitude  exp(-V(J_l - J_m)) between two clouds,
* the coefficient c of the logarithmic infrared growth, obtained by a
  least-squares fit of N(omega_min) against a + c ln(omega_max/omega_min).

Only overlap *magnitudes* are computed.  The relative phase of two clouds
grows without bound as the infrared cutoff is lowered (it involves an
integral that diverges for any nontrivial emission current), so it is
deliberately not evaluated anywhere in this package.

Quadrature: Gauss-Legendre in cos(theta), periodic trapezoid in phi, and
composite Gauss-Legendre panels on a logarithmic frequency axis.  Node
construction is cached; summation order is fixed by the kernel backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import NegativeBeyondTolerance, ThresholdOutOfRange, WindowTooNarrow
from .kinematics import CompositeCurrent, EmissionCurrent

#: current argument accepted by the functionals below; None means the
#: zero current (vacuum cloud).
CurrentLike = EmissionCurrent | CompositeCurrent | None

_OMEGA_PANEL_ORDER = 8


@dataclass(frozen=True)
class SpectralCutoffs:
    """Infrared / ultraviolet frequency window, 0 < omega_min < omega_max."""

    omega_min: float
    omega_max: float

    def __post_init__(self):
        if not (0.0 < self.omega_min < self.omega_max):
            raise ValueError(
                f"need 0 < omega_min < omega_max, got [{self.omega_min}, {self.omega_max}]"
            )

    @property
    def decades(self) -> float:
        return math.log10(self.omega_max / self.omega_min)


@dataclass(frozen=True)
class QuadratureSpec:
    """Fixed-order product rule: node counts per axis.

    n_omega is rounded up to a whole number of Gauss panels of order 8 on
    the log-frequency axis.
    """

    n_cos: int = 48
    n_phi: int = 96
    n_omega: int = 32
    rule: str = "gauss-legendre x periodic-trapezoid x log-gauss"

    def __post_init__(self):
        if min(self.n_cos, self.n_phi, self.n_omega) < 2:
            raise ValueError("all node counts must be >= 2")

    def refined(self, factor: int) -> "QuadratureSpec":
        return QuadratureSpec(
            self.n_cos * factor, self.n_phi * factor, self.n_omega * factor, self.rule
        )


@dataclass(frozen=True)
class SpectralSummary:
    """One-stop spectral record for a current over a cutoff window."""

    n_bar: float
    v_functional: float
    c_coefficient: float
    fit_residual: float


@lru_cache(maxsize=64)
def _angular_nodes(n_cos: int, n_phi: int):
    mu, mu_w = np.polynomial.legendre.leggauss(n_cos)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    phi_w = np.full(n_phi, 2.0 * math.pi / n_phi)
    return mu, mu_w, np.cos(phi), np.sin(phi), phi_w


@lru_cache(maxsize=256)
def _log_omega_nodes(omega_min: float, omega_max: float, n_omega: int):
    # composite Gauss-Legendre on u = ln(omega); weight carries domega = omega du
    order = min(_OMEGA_PANEL_ORDER, n_omega)
    panels = int(math.ceil(n_omega / order))
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = math.log(omega_min), math.log(omega_max)
    edges = np.linspace(lo, hi, panels + 1)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        u = mid + half * x
        om = np.exp(u)
        nodes.append(om)
        weights.append(half * w * om)
    return np.concatenate(nodes), np.concatenate(weights)


def _leg_arrays(current: CurrentLike):
    """Signed leg system (E, px, py, pz, C, minkowski dot table)."""
    if current is None:
        z = np.zeros(0)
        return z, z, z, z, z, np.zeros((0, 0))
    if isinstance(current, EmissionCurrent):
        states = [current.p_in, current.p_out]
        coeffs = [current.charge, -current.charge]
    elif isinstance(current, CompositeCurrent):
        states, coeffs = [], []
        for a, b in zip(current.legs[:-1], current.legs[1:]):
            states += [a, b]
            coeffs += [current.charge, -current.charge]
    else:
        raise TypeError(f"unsupported current type: {type(current).__name__}")
    vecs = np.array([s.momentum.as_array() for s in states])
    dots = (
        np.outer(vecs[:, 0], vecs[:, 0])
        - np.outer(vecs[:, 1], vecs[:, 1])
        - np.outer(vecs[:, 2], vecs[:, 2])
        - np.outer(vecs[:, 3], vecs[:, 3])
    )
    return (
        np.ascontiguousarray(vecs[:, 0]),
        np.ascontiguousarray(vecs[:, 1]),
        np.ascontiguousarray(vecs[:, 2]),
        np.ascontiguousarray(vecs[:, 3]),
        np.array(coeffs, dtype=float),
        dots,
    )


def _difference_arrays(cur_l: CurrentLike, cur_m: CurrentLike):
    el, xl, yl, zl, cl, _ = _leg_arrays(cur_l)
    em, xm, ym, zm, cm, _ = _leg_arrays(cur_m)
    e = np.concatenate([el, em])
    x = np.concatenate([xl, xm])
    y = np.concatenate([yl, ym])
    z = np.concatenate([zl, zm])
    c = np.concatenate([cl, -cm])
    dots = np.outer(e, e) - (np.outer(x, x) + np.outer(y, y) + np.outer(z, z))
    return e, x, y, z, c, dots


def _integral(legsys, omegas, omega_w, quad: QuadratureSpec) -> float:
    e, x, y, z, c, dots = legsys
    if e.size == 0:
        return 0.0
    mu, mu_w, cphi, sphi, phi_w = _angular_nodes(quad.n_cos, quad.n_phi)
    return kernels.soft_number_integral(
        e, x, y, z, c, dots, mu, mu_w, cphi, sphi, phi_w, omegas, omega_w
    )


def _window_integral(legsys, cutoffs: SpectralCutoffs, quad: QuadratureSpec) -> float:
    om, om_w = _log_omega_nodes(cutoffs.omega_min, cutoffs.omega_max, quad.n_omega)
    return _integral(legsys, om, om_w, quad)


def polarization_sum(j: np.ndarray) -> float:
    """Transverse polarization weight of a conserved current value.

    For k.J = 0 the Lorentz contraction -(J*.J) equals the sum over the two
    physical polarizations of |eps.J|^2.  Raises NegativeBeyondTolerance if
    the contraction is negative beyond rounding, which signals a
    non-conserved input; small negatives are clamped to zero.
    """
    j = np.asarray(j, dtype=complex)
    val = float(np.sum(np.abs(j[1:]) ** 2) - abs(j[0]) ** 2)
    scale = float(np.sum(np.abs(j) ** 2))
    if val < -1e-9 * scale:
        raise NegativeBeyondTolerance(
            f"-(J*.J) = {val:.3e} < 0 beyond tolerance; current not conserved"
        )
    return max(val, 0.0)


def spectral_density(
    current: CurrentLike, omega: float, quad: QuadratureSpec = QuadratureSpec()
) -> float:
    """dN/domega at one frequency: omega times the angular integral of S."""
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    return _integral(
        _leg_arrays(current), np.array([omega]), np.array([1.0]), quad
    )


def mean_photon_number(
    current: CurrentLike,
    cutoffs: SpectralCutoffs,
    quad: QuadratureSpec = QuadratureSpec(),
) -> float:
    """Expected photon number radiated into the cutoff window."""
    return _window_integral(_leg_arrays(current), cutoffs, quad)


def v_functional(
    cur_l: CurrentLike,
    cur_m: CurrentLike,
    cutoffs: SpectralCutoffs,
    quad: QuadratureSpec = QuadratureSpec(),
) -> float:
    """Cloud-difference norm V(J_l - J_m) = 1/2 Int dk~ |J_l - J_m|^2.

    Symmetric in its current arguments; pass None for the zero current, in
    which case V(J, None) is exactly half of mean_photon_number(J) (the two
    share quadrature nodes).  A squared seminorm: rounding residue below
    zero is clamped.
    """
    v = 0.5 * _window_integral(_difference_arrays(cur_l, cur_m), cutoffs, quad)
    return max(v, 0.0)


def overlap_magnitude(
    cur_l: CurrentLike,
    cur_m: CurrentLike,
    cutoffs: SpectralCutoffs,
    quad: QuadratureSpec = QuadratureSpec(),
) -> float:
    """|<cloud_l | cloud_m>| = exp(-V(J_l - J_m)); magnitude only, no phase."""
    return math.exp(-v_functional(cur_l, cur_m, cutoffs, quad))


def energy_tail_number(
    current: CurrentLike,
    threshold: float,
    cutoffs: SpectralCutoffs,
    quad: QuadratureSpec = QuadratureSpec(),
) -> float:
    """Expected photon count above `threshold`, up to the UV cutoff."""
    if not (cutoffs.omega_min <= threshold <= cutoffs.omega_max):
        raise ThresholdOutOfRange(
            f"threshold {threshold:g} outside [{cutoffs.omega_min:g}, {cutoffs.omega_max:g}]"
        )
    if threshold == cutoffs.omega_max:
        return 0.0
    tail = SpectralCutoffs(threshold, cutoffs.omega_max)
    return _window_integral(_leg_arrays(current), tail, quad)


def divergence_coefficient(
    current: CurrentLike,
    window: SpectralCutoffs,
    quad: QuadratureSpec = QuadratureSpec(),
    n_points: int = 12,
) -> tuple[float, float]:
    """Fit N(omega_min) = a + c ln(omega_max/omega_min) over the window.

    omega_min values are log-spaced from window.omega_min up to a tenth of
    the UV cutoff, so every point integrates at least one decade.  Returns
    (c, residual); the residual is the fit RMS relative to the mean photon
    number (absolute when that mean vanishes).  Requires a window of at
    least two decades.
    """
    if n_points < 8:
        raise ValueError("fit protocol needs at least 8 points")
    if window.omega_max / window.omega_min < 100.0:
        raise WindowTooNarrow(
            f"window spans {window.decades:.2f} decades; need >= 2"
        )
    legsys = _leg_arrays(current)
    omins = np.geomspace(window.omega_min, window.omega_max / 10.0, n_points)
    y = np.array(
        [
            _window_integral(legsys, SpectralCutoffs(om, window.omega_max), quad)
            for om in omins
        ]
    )
    x = np.log(window.omega_max / omins)
    design = np.column_stack([np.ones_like(x), x])
    sol, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ sol
    rms = float(np.sqrt(np.mean(resid**2)))
    mean = float(np.mean(y))
    rel = rms / mean if mean > 0.0 else rms
    return max(float(sol[1]), 0.0), rel


def spectral_summary(
    current: CurrentLike,
    cutoffs: SpectralCutoffs,
    quad: QuadratureSpec = QuadratureSpec(),
) -> SpectralSummary:
    """N, V(J), fitted divergence coefficient and residual in one record."""
    n_bar = mean_photon_number(current, cutoffs, quad)
    v = v_functional(current, None, cutoffs, quad)
    c, resid = divergence_coefficient(current, cutoffs, quad)
    return SpectralSummary(n_bar, v, c, resid)


def transverse_basis(k_dir: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two orthonormal 3-vectors transverse to `k_dir` (deterministic rule)."""
    k = np.asarray(k_dir, dtype=float)
    k = k / np.linalg.norm(k)
    ref = np.array([0.0, 0.0, 1.0]) if abs(k[2]) < 0.99999 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(ref, k)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(k, e1)
    return e1, e2


def current_conservation_residual(current, k) -> float:
    """|k.J| for diagnostics; zero up to rounding for valid inputs."""
    from .kinematics import classical_current

    j = classical_current(current, k)
    kv = k.as_array()
    return abs(kv[0] * j[0] - kv[1] * j[1] - kv[2] * j[2] - kv[3] * j[3])
