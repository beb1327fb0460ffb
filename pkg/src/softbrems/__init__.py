"""Soft-photon bremsstrahlung clouds and infrared decoherence.

The package computes, for charged-particle scattering in the soft-photon
approximation: the classical emission current, the photon spectrum and its
logarithmically divergent number integral, overlap magnitudes between the
coherent photon clouds of different scattering outcomes, a brute-force
truncated Fock-space cross-check, and Monte Carlo estimates tied to the
suppression of interference between outcomes as the infrared cutoff drops.

Relative phases between clouds are never computed: they diverge with the
cutoff, and every exported quantity is a magnitude.
"""

from .errors import (
    BelowThreshold,
    DimensionMismatch,
    GridMismatch,
    InvalidTolerance,
    NegativeBeyondTolerance,
    NonPositiveFrequency,
    NotHermitian,
    NotLightlike,
    NotUnit,
    SoftbremsError,
    ThresholdOutOfRange,
    TruncationTooSmall,
    WindowTooNarrow,
)
from .kernels import active_backend
from .kinematics import (
    ALPHA_FS,
    E_CHARGE,
    CompositeCurrent,
    EmissionCurrent,
    FourVector,
    ParticleState,
    ScatteringEvent,
    classical_current,
    composite_current,
    elastic_final_state,
    minkowski_dot,
    sample_direction,
    sample_directions,
)
from .radiation import (
    QuadratureSpec,
    SpectralCutoffs,
    SpectralSummary,
    divergence_coefficient,
    energy_tail_number,
    mean_photon_number,
    overlap_magnitude,
    polarization_sum,
    spectral_density,
    spectral_summary,
    v_functional,
)
from .fockspace import (
    CoherentSpec,
    ModeGrid,
    ObservableSpec,
    TruncatedFockState,
    bogoliubov_residual,
    build_mode_grid,
    displace_vacuum,
    fock_overlap,
    interference_term,
    observable_expectation,
    project_current,
)
from .branches import (
    Branch,
    BranchSet,
    DecoherenceMatrix,
    build_branches,
    coherence_metrics,
    decoherence_matrix,
    detector_efficiency,
    return_probability,
)
from .rng import make_rng, split_rng

__version__ = "0.1.0"
