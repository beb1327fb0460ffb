"""Hot numerical kernels with selectable backends.

The phase-space integrals dominate runtime: every spectral quantity reduces
to sums of the transverse polarization weight over (omega, cos theta, phi)
product-rule nodes.  Two interchangeable implementations are provided:

* a numba ``@njit`` version with Kahan-compensated accumulation, and
* a pure-numpy vectorized fallback.

The backend is chosen once at import time from the environment variable
``SOFTBREMS_BACKEND``:

* unset or ``auto``: numba if importable, else numpy;
* ``numba``: force numba (raises if numba is unavailable);
* ``numpy``: force the pure-numpy path.

Within one backend the summation order is fixed, so repeated runs are
bit-identical.  The two backends agree to ~1e-13 relative (different
summation orders), which the test suite checks.

Kernel inputs describe a "signed leg system": arrays of leg energies,
3-momenta and signed charges C_l such that the current at photon momentum
k is J(k) = i * sum_l C_l p_l / (p_l . k).  The transverse polarization
weight at a node is then  S(k) = -sum_{lm} C_l C_m (p_l . p_m) /
((p_l . k)(p_m . k)),  which is non-negative for conserved currents.
"""

from __future__ import annotations

import math
import os

import numpy as np

ENV_BACKEND = "SOFTBREMS_BACKEND"

try:
    from numba import njit

    _NUMBA_OK = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None
    _NUMBA_OK = False


def select_backend(requested: str | None, numba_available: bool) -> str:
    """Resolve the backend name from an env-style request string."""
    req = (requested or "auto").strip().lower()
    if req in ("", "auto"):
        return "numba" if numba_available else "numpy"
    if req == "numpy":
        return "numpy"
    if req == "numba":
        if not numba_available:
            raise RuntimeError(
                "SOFTBREMS_BACKEND=numba requested but numba is not importable"
            )
        return "numba"
    raise RuntimeError(f"unknown SOFTBREMS_BACKEND value: {requested!r}")


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------


def _direction_table(mu, cphi, sphi):
    # node order is mu-major, matching the numba loops
    s = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None))
    nx = np.outer(s, cphi).ravel()
    ny = np.outer(s, sphi).ravel()
    nz = np.repeat(mu, cphi.size)
    return nx, ny, nz


def soft_number_integral_numpy(
    energies, px, py, pz, coeffs, dots, mu, mu_w, cphi, sphi, phi_w, omegas, omega_w
):
    """Sum over product-rule nodes of w_omega * omega * w_angle * S(k).

    With quadrature weights this is the phase-space integral of the
    polarization weight, i.e. the expected photon number without the 1/2.
    With a single omega node of weight one it is the spectral density at
    that omega.
    """
    nleg = energies.size
    if nleg == 0:
        return 0.0
    nx, ny, nz = _direction_table(mu, cphi, sphi)
    # reduced denominators E_l - p_l . n, one row per angular node
    dred = (
        energies[None, :]
        - nx[:, None] * px[None, :]
        - ny[:, None] * py[None, :]
        - nz[:, None] * pz[None, :]
    )
    w_ang = np.outer(mu_w, phi_w).ravel()
    total = 0.0
    for a in range(omegas.size):
        om = omegas[a]
        r = coeffs[None, :] / (om * dred)
        s_pol = -np.einsum("nl,lm,nm->n", r, dots, r)
        total += omega_w[a] * om * float(np.dot(w_ang, s_pol))
    return total


def count_in_cap_numpy(dirs, axis, cos_threshold):
    """Count direction rows with dirs . axis >= cos_threshold."""
    return int(np.count_nonzero(dirs @ axis >= cos_threshold))


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if _NUMBA_OK:

    @njit(cache=True, nogil=True)
    def _soft_number_integral_numba(
        energies, px, py, pz, coeffs, dots, mu, mu_w, cphi, sphi, phi_w, omegas, omega_w
    ):  # pragma: no cover - exercised through the dispatching wrapper
        nleg = energies.size
        d = np.empty(nleg)
        total = 0.0
        comp = 0.0  # Kahan compensation
        for a in range(omegas.size):
            om = omegas[a]
            wom = omega_w[a] * om
            for i in range(mu.size):
                m = mu[i]
                smu = math.sqrt(max(1.0 - m * m, 0.0))
                wmu = wom * mu_w[i]
                for j in range(cphi.size):
                    nx = smu * cphi[j]
                    ny = smu * sphi[j]
                    for l in range(nleg):
                        d[l] = om * (energies[l] - px[l] * nx - py[l] * ny - pz[l] * m)
                    g = 0.0
                    for l in range(nleg):
                        rl = coeffs[l] / d[l]
                        for q in range(nleg):
                            g -= rl * (coeffs[q] / d[q]) * dots[l, q]
                    term = wmu * phi_w[j] * g
                    y = term - comp
                    t = total + y
                    comp = (t - total) - y
                    total = t
        return total

    def soft_number_integral_numba(
        energies, px, py, pz, coeffs, dots, mu, mu_w, cphi, sphi, phi_w, omegas, omega_w
    ):
        if energies.size == 0:
            return 0.0
        return float(
            _soft_number_integral_numba(
                energies, px, py, pz, coeffs, dots, mu, mu_w, cphi, sphi, phi_w,
                omegas, omega_w,
            )
        )

    @njit(cache=True, nogil=True)
    def _count_in_cap_numba(dirs, axis, cos_threshold):  # pragma: no cover
        n = 0
        for i in range(dirs.shape[0]):
            dot = (
                dirs[i, 0] * axis[0] + dirs[i, 1] * axis[1] + dirs[i, 2] * axis[2]
            )
            if dot >= cos_threshold:
                n += 1
        return n

    def count_in_cap_numba(dirs, axis, cos_threshold):
        return int(_count_in_cap_numba(dirs, axis, cos_threshold))

else:  # pragma: no cover
    soft_number_integral_numba = None
    count_in_cap_numba = None


ACTIVE_BACKEND = select_backend(os.environ.get(ENV_BACKEND), _NUMBA_OK)

if ACTIVE_BACKEND == "numba":
    soft_number_integral = soft_number_integral_numba
    count_in_cap = count_in_cap_numba
else:
    soft_number_integral = soft_number_integral_numpy
    count_in_cap = count_in_cap_numpy


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return ACTIVE_BACKEND
