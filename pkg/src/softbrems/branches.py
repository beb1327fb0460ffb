"""Weighted scattering branches and their photon-cloud decoherence.

A scattering run is modeled as an ensemble: a no-interaction outcome with
weight c0 plus n elastic outcomes with uniformly sampled center-of-momentum
directions and equal weights (weak scattering is isotropic to the accuracy
used here).  Each interacting branch drags a soft-photon cloud sourced by
its emission current; the pairwise overlap magnitudes form the decoherence
matrix, whose off-diagonals die as the infrared cutoff is lowered.

The neutral particles radiate nothing and enter only as orthogonality
labels between branches, so they never appear in any computed number.
Branch weights hold magnitudes with zero phase by default (a config hook
accepts user weights); phases never enter any computed quantity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidTolerance, ThresholdOutOfRange
from .kinematics import (
    EmissionCurrent,
    ParticleState,
    cm_velocity,
    elastic_final_state,
    sample_direction,
    sample_directions,
    ScatteringEvent,
)
from .radiation import (
    QuadratureSpec,
    SpectralCutoffs,
    energy_tail_number,
    overlap_magnitude,
)

WEIGHT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class Branch:
    """One scattering outcome with its photon-cloud source."""

    weight: complex
    event: ScatteringEvent
    current: EmissionCurrent

    def __post_init__(self):
        w = abs(complex(self.weight))
        if not math.isfinite(w) or w > 1.0 + WEIGHT_NORM_TOL:
            raise ValueError("branch weight must be finite with |weight| <= 1")


@dataclass(frozen=True)
class BranchSet:
    """No-interaction weight plus the interacting branches; unit total weight."""

    vacuum_weight: complex
    branches: tuple[Branch, ...]

    def __post_init__(self):
        total = abs(complex(self.vacuum_weight)) ** 2 + sum(
            abs(complex(b.weight)) ** 2 for b in self.branches
        )
        if abs(total - 1.0) > WEIGHT_NORM_TOL:
            raise ValueError(f"branch weights must normalize to 1, got {total!r}")

    @property
    def weight_magnitudes(self) -> np.ndarray:
        """|c| for [vacuum, branch_1, ..., branch_n]."""
        return np.array(
            [abs(complex(self.vacuum_weight))]
            + [abs(complex(b.weight)) for b in self.branches]
        )


@dataclass(frozen=True, eq=False)
class DecoherenceMatrix:
    """Pairwise cloud-overlap magnitudes; row/col 0 is the vacuum branch."""

    entries: np.ndarray
    cutoffs: SpectralCutoffs

    def __post_init__(self):
        m = self.entries
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("entries must be a square matrix")
        if not np.allclose(np.diag(m), 1.0, atol=1e-12):
            raise ValueError("diagonal must be 1")
        if np.any(m < 0.0) or np.any(m > 1.0 + 1e-12):
            raise ValueError("entries must lie in [0, 1]")
        if not np.array_equal(m, m.T):
            raise ValueError("matrix must be symmetric")

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def build_branches(
    e_in: ParticleState,
    nu_in: ParticleState,
    n_branches: int,
    rng: np.random.Generator,
    vacuum_rate: float = 0.5,
    weights=None,
) -> BranchSet:
    """Sample `n_branches` isotropic elastic outcomes with equal weights.

    `vacuum_rate` is |c0|^2, the no-interaction probability.  A `weights`
    sequence (one complex weight per branch) overrides the equal split; it
    must normalize together with the vacuum weight.
    """
    if n_branches < 1:
        raise ValueError("need at least one branch")
    if not (0.0 <= vacuum_rate < 1.0):
        raise ValueError("vacuum_rate must lie in [0, 1)")
    if weights is None:
        w = math.sqrt((1.0 - vacuum_rate) / n_branches)
        weights = [w] * n_branches
    elif len(weights) != n_branches:
        raise ValueError("weights length must equal n_branches")
    branches = []
    for label in range(n_branches):
        d = sample_direction(rng)
        event = elastic_final_state(e_in, nu_in, d)
        current = EmissionCurrent(e_in, event.e_out)
        branches.append(Branch(complex(weights[label]), event, current))
    return BranchSet(complex(math.sqrt(vacuum_rate)), tuple(branches))


def decoherence_matrix(
    bset: BranchSet,
    cutoffs: SpectralCutoffs,
    quad: QuadratureSpec = QuadratureSpec(),
) -> DecoherenceMatrix:
    """Overlap magnitudes between every pair of clouds (vacuum included)."""
    currents = [None] + [b.current for b in bset.branches]
    n = len(currents)
    m = np.eye(n)
    for l in range(n):
        for k in range(l + 1, n):
            m[l, k] = m[k, l] = overlap_magnitude(
                currents[l], currents[k], cutoffs, quad
            )
    return DecoherenceMatrix(m, cutoffs)


def coherence_metrics(
    bset: BranchSet, matrix: DecoherenceMatrix
) -> tuple[float, float]:
    """(purity_proxy, offdiag_norm) of the magnitude-dephased ensemble.

    offdiag_norm = sum_{l != m} |c_l||c_m| M_lm, the total coherent weight
    still connecting distinct outcomes; purity_proxy = sum_l |c_l|^4 +
    sum_{l != m} |c_l|^2 |c_m|^2 M_lm^2, which falls to the mixed-state
    value sum |c_l|^4 as the off-diagonals die.
    """
    w = bset.weight_magnitudes
    if matrix.size != w.size:
        raise DimensionMismatch(
            f"matrix is {matrix.size}x{matrix.size}, set has {w.size} outcomes"
        )
    m = matrix.entries
    off = ~np.eye(w.size, dtype=bool)
    offdiag_norm = float(np.outer(w, w)[off] @ m[off])
    purity = float(np.sum(w**4) + (np.outer(w**2, w**2)[off] @ (m[off] ** 2)))
    return purity, offdiag_norm


def detector_efficiency(
    branch: Branch,
    threshold: float,
    cutoffs: SpectralCutoffs,
    quad: QuadratureSpec = QuadratureSpec(),
) -> float:
    """Probability that the cloud holds at least one photon above `threshold`.

    Per-channel occupations of a coherent cloud are Poissonian, so the
    no-photon probability of the tail is exp(-N_tail); the detector is a
    sharp step that fires on any photon above threshold.
    """
    tail = energy_tail_number(branch.current, threshold, cutoffs, quad)
    return 1.0 - math.exp(-tail)


def wilson_interval(hits: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial fraction."""
    if n <= 0:
        raise ValueError("need at least one sample")
    p = hits / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == n else min(1.0, center + half)
    return lo, hi


def return_probability(
    e_in: ParticleState,
    nu_in: ParticleState,
    delta: float,
    n_samples: int,
    rng: np.random.Generator,
) -> tuple[float, tuple[float, float]]:
    """Monte Carlo probability that a rescattered branch restores the input.

    Composite currents telescope, so the rescattered cloud is trivial only
    when the final electron direction returns to the initial one; the cloud
    norm grows strictly with the angular gap.  Restoration is therefore an
    angular criterion: the fraction of isotropic final directions within a
    solid-angle fraction `delta` of the incoming electron's CM direction.
    Returns the estimate with its 95% Wilson interval.
    """
    if not (0.0 < delta <= 1.0):
        raise InvalidTolerance(f"delta must lie in (0, 1], got {delta!r}")
    if n_samples < 1000:
        raise ValueError("need at least 1e3 samples")
    beta = cm_velocity(e_in, nu_in)
    axis = e_in.momentum.boosted(beta).spatial
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        raise ValueError("electron is at rest in the CM frame")
    axis = axis / norm
    cos_threshold = 1.0 - 2.0 * delta
    dirs = sample_directions(rng, n_samples)
    hits = int(np.count_nonzero(dirs @ axis >= cos_threshold))
    return hits / n_samples, wilson_interval(hits, n_samples)
