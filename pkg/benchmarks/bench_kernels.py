"""Benchmark the hot phase-space kernel: numba backend vs pure numpy.

Times the photon-number integral for a two-leg emission current and for a
four-leg difference system over a range of quadrature sizes, and the
Monte Carlo cap counter.  Run directly:

    python benchmarks/bench_kernels.py

The active package backend (SOFTBREMS_BACKEND) does not matter here; both
implementations are imported explicitly.
"""

import math
import time

import numpy as np

from softbrems import kernels
from softbrems.kinematics import EmissionCurrent, FourVector, ParticleState
from softbrems.radiation import (
    QuadratureSpec,
    _angular_nodes,
    _difference_arrays,
    _leg_arrays,
    _log_omega_nodes,
)


def bench_current(energy=10.0, mass=1.0, angle_deg=90.0):
    p = math.sqrt(energy * energy - mass * mass)
    th = math.radians(angle_deg)
    p_in = ParticleState(FourVector(energy, 0.0, 0.0, p), mass)
    p_out = ParticleState(
        FourVector(energy, p * math.sin(th), 0.0, p * math.cos(th)), mass
    )
    return EmissionCurrent(p_in, p_out)


def time_fn(fn, args, repeat=5):
    fn(*args)  # warm up (JIT compile for the numba path)
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    cur = bench_current()
    cur2 = bench_current(angle_deg=91.0)
    legsets = {
        "2-leg current": _leg_arrays(cur),
        "4-leg difference": _difference_arrays(cur, cur2),
    }
    impls = {"numpy": kernels.soft_number_integral_numpy}
    if kernels.soft_number_integral_numba is not None:
        impls["numba"] = kernels.soft_number_integral_numba

    print(f"active package backend: {kernels.active_backend()}")
    header = f"{'case':<18} {'quad (cos,phi,om)':<20} " + " ".join(
        f"{n:>12}" for n in impls
    )
    print(header)
    print("-" * len(header))
    for label, legs in legsets.items():
        for spec in (
            QuadratureSpec(24, 48, 16),
            QuadratureSpec(48, 96, 32),
            QuadratureSpec(96, 192, 64),
        ):
            mu, mu_w, cphi, sphi, phi_w = _angular_nodes(spec.n_cos, spec.n_phi)
            om, om_w = _log_omega_nodes(1e-3, 1.0, spec.n_omega)
            args = (*legs, mu, mu_w, cphi, sphi, phi_w, om, om_w)
            times = {name: time_fn(fn, args) for name, fn in impls.items()}
            vals = {name: fn(*args) for name, fn in impls.items()}
            ref = list(vals.values())[0]
            for v in vals.values():
                assert abs(v / ref - 1.0) < 1e-10, "backends disagree"
            cells = f"({spec.n_cos},{spec.n_phi},{spec.n_omega})"
            row = f"{label:<18} {cells:<20} " + " ".join(
                f"{times[n] * 1e3:>10.2f}ms" for n in impls
            )
            print(row)

    rng = np.random.default_rng(0)
    dirs = rng.normal(size=(2_000_000, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    axis = np.array([0.0, 0.0, 1.0])
    counters = {"numpy": kernels.count_in_cap_numpy}
    if kernels.count_in_cap_numba is not None:
        counters["numba"] = kernels.count_in_cap_numba
    print()
    for name, fn in counters.items():
        t = time_fn(fn, (dirs, axis, 0.998))
        print(f"cap count 2e6 dirs   {name:>6}: {t * 1e3:8.2f}ms")


if __name__ == "__main__":
    main()
