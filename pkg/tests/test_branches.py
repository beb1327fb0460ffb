import math

import numpy as np
import pytest

import softbrems.fockspace as fs
from softbrems.branches import (
    Branch,
    BranchSet,
    DecoherenceMatrix,
    build_branches,
    coherence_metrics,
    decoherence_matrix,
    detector_efficiency,
    return_probability,
    wilson_interval,
)
from softbrems.errors import BelowThreshold, DimensionMismatch, InvalidTolerance
from softbrems.kinematics import (
    CompositeCurrent,
    EmissionCurrent,
    FourVector,
    ParticleState,
    elastic_final_state,
)
from softbrems.radiation import (
    QuadratureSpec,
    SpectralCutoffs,
    energy_tail_number,
    mean_photon_number,
    v_functional,
)
from softbrems.rng import make_rng

QUAD = QuadratureSpec()


def electron(energy=10.0, mass=1.0, direction=(0.0, 0.0, 1.0)):
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    p = math.sqrt(energy**2 - mass**2)
    return ParticleState(FourVector(energy, *(p * d)), mass)


def neutrino(energy=10.0, mass=0.1):
    p = math.sqrt(energy**2 - mass**2)
    return ParticleState(FourVector(energy, 0.0, 0.0, -p), mass)


def cm_axis(e_in, nu_in):
    total = e_in.momentum + nu_in.momentum
    beta = total.spatial / total.t
    d = e_in.momentum.boosted(beta).spatial
    return d / np.linalg.norm(d)


class TestBuildBranches:
    def test_single_branch_unit_weight(self):
        bset = build_branches(electron(), neutrino(), 1, make_rng(1), vacuum_rate=0.0)
        assert abs(bset.branches[0].weight) == pytest.approx(1.0, abs=1e-12)
        assert abs(bset.vacuum_weight) == 0.0

    def test_equal_weight_split(self):
        bset = build_branches(electron(), neutrino(), 4, make_rng(2), vacuum_rate=0.5)
        for b in bset.branches:
            assert abs(b.weight) ** 2 == pytest.approx(0.125, rel=1e-12)

    def test_direction_distribution_uniform(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        e_in, nu_in = electron(), neutrino()
        bset = build_branches(e_in, nu_in, 1000, make_rng(3))
        total = e_in.momentum + nu_in.momentum
        beta = total.spatial / total.t
        cos_cm = np.array(
            [
                (lambda d: d[2] / np.linalg.norm(d))(b.event.e_out.momentum.boosted(beta).spatial)
                for b in bset.branches
            ]
        )
        hist, _ = np.histogram(cos_cm, bins=20, range=(-1.0, 1.0))
        expected = len(cos_cm) / 20.0
        stat = float(np.sum((hist - expected) ** 2 / expected))
        assert scipy_stats.chi2.sf(stat, 19) > 0.001

    def test_below_threshold(self):
        e = ParticleState(FourVector(1.0, 0.0, 0.0, 0.0), 1.0)
        nu = ParticleState(FourVector(0.1, 0.0, 0.0, 0.0), 0.1)
        with pytest.raises(BelowThreshold):
            build_branches(e, nu, 2, make_rng(4))

    def test_custom_weights(self):
        w = [math.sqrt(0.3), math.sqrt(0.2)]
        bset = build_branches(
            electron(), neutrino(), 2, make_rng(5), vacuum_rate=0.5, weights=w
        )
        assert abs(bset.branches[0].weight) ** 2 == pytest.approx(0.3, rel=1e-12)

    def test_normalization_enforced(self):
        with pytest.raises(ValueError):
            build_branches(
                electron(), neutrino(), 2, make_rng(6), vacuum_rate=0.5,
                weights=[1.0, 1.0],
            )


def two_branch_set(angles=(90.0, 60.0), vacuum_rate=0.5):
    e_in, nu_in = electron(), neutrino()
    branches = []
    w = math.sqrt((1.0 - vacuum_rate) / len(angles))
    for ang in angles:
        th = math.radians(ang)
        d = np.array([math.sin(th), 0.0, math.cos(th)])
        ev = elastic_final_state(e_in, nu_in, d)
        branches.append(Branch(w, ev, EmissionCurrent(e_in, ev.e_out)))
    return BranchSet(math.sqrt(vacuum_rate), tuple(branches))


class TestDecoherenceMatrix:
    def test_vacuum_row_formula(self):
        bset = two_branch_set(angles=(90.0,), vacuum_rate=0.5)
        cut = SpectralCutoffs(1e-2, 1.0)
        m = decoherence_matrix(bset, cut, QUAD)
        nbar = mean_photon_number(bset.branches[0].current, cut, QUAD)
        assert m.entries.shape == (2, 2)
        assert m.entries[0, 1] == pytest.approx(math.exp(-0.5 * nbar), abs=1e-12)

    def test_duplicate_directions_give_unit_entry(self):
        bset = two_branch_set(angles=(90.0, 90.0))
        m = decoherence_matrix(bset, SpectralCutoffs(1e-2, 1.0), QUAD)
        assert m.entries[1, 2] == 1.0

    def test_sweep_strictly_decreasing(self):
        bset = two_branch_set()
        vals = []
        for om in np.geomspace(1e-1, 1e-4, 7):
            m = decoherence_matrix(bset, SpectralCutoffs(float(om), 1.0), QUAD)
            vals.append(m.entries[1, 2])
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_log_triangle_inequality(self):
        rng = make_rng(8)
        bset = build_branches(electron(), neutrino(), 4, rng)
        m = decoherence_matrix(bset, SpectralCutoffs(1e-2, 1.0), QUAD).entries
        n = m.shape[0]
        for l in range(n):
            for k in range(n):
                for j in range(n):
                    assert m[l, j] >= m[l, k] * m[k, j] - 1e-6

    def test_validation(self):
        bad = np.array([[1.0, 0.5], [0.4, 1.0]])
        with pytest.raises(ValueError):
            DecoherenceMatrix(bad, SpectralCutoffs(0.1, 1.0))


class TestCoherenceMetrics:
    def test_fully_coherent_identity(self):
        bset = two_branch_set()
        n = len(bset.branches) + 1
        m = DecoherenceMatrix(np.ones((n, n)), SpectralCutoffs(0.1, 1.0))
        purity, offdiag = coherence_metrics(bset, m)
        w = bset.weight_magnitudes
        assert offdiag == pytest.approx(np.sum(w) ** 2 - np.sum(w**2), rel=1e-12)

    def test_perfect_mixture(self):
        bset = two_branch_set()
        n = len(bset.branches) + 1
        m = DecoherenceMatrix(np.eye(n), SpectralCutoffs(0.1, 1.0))
        purity, offdiag = coherence_metrics(bset, m)
        assert offdiag == 0.0
        assert purity == pytest.approx(np.sum(bset.weight_magnitudes**4), rel=1e-12)

    def test_dimension_mismatch(self):
        bset = two_branch_set()
        m = DecoherenceMatrix(np.eye(2), SpectralCutoffs(0.1, 1.0))
        with pytest.raises(DimensionMismatch):
            coherence_metrics(bset, m)

    def test_offdiag_log_linear_decay(self):
        bset = two_branch_set()
        omins = np.geomspace(1e-2, 1e-5, 8)
        y = []
        for om in omins:
            m = decoherence_matrix(bset, SpectralCutoffs(float(om), 1.0), QUAD)
            y.append(math.log(coherence_metrics(bset, m)[1]))
        y = np.array(y)
        x = np.log(1.0 / omins)
        design = np.column_stack([np.ones_like(x), x])
        sol, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = y - design @ sol
        assert sol[1] < 0.0
        assert np.sqrt(np.mean(resid**2)) / abs(np.mean(y)) < 0.02

    def test_collapse_monotonicity_random_sets(self):
        rng = make_rng(12)
        for trial in range(3):
            bset = build_branches(electron(), neutrino(), 3, rng)
            prev = None
            for om in (1e-2, 5e-3, 2.5e-3):
                m = decoherence_matrix(bset, SpectralCutoffs(om, 1.0), QUAD).entries
                off = m[~np.eye(m.shape[0], dtype=bool)]
                if prev is not None:
                    assert np.all(off < prev)
                prev = off


class TestDetectorEfficiency:
    def test_uv_threshold_gives_zero(self):
        bset = two_branch_set(angles=(90.0,))
        cut = SpectralCutoffs(1e-2, 1.0)
        assert detector_efficiency(bset.branches[0], 1.0, cut, QUAD) == 0.0

    def test_poisson_identity_at_log2(self):
        branch = two_branch_set(angles=(90.0,)).branches[0]
        cut = SpectralCutoffs(1e-2, 1.0)
        lo, hi = cut.omega_min, cut.omega_max
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if energy_tail_number(branch.current, mid, cut, QUAD) > math.log(2.0):
                lo = mid
            else:
                hi = mid
        ed = math.sqrt(lo * hi)
        assert detector_efficiency(branch, ed, cut, QUAD) == pytest.approx(0.5, abs=1e-6)

    def test_matches_poisson_mc(self):
        branch = two_branch_set(angles=(90.0,), vacuum_rate=0.0).branches[0]
        cut = SpectralCutoffs(1e-2, 1.0)
        ed = 0.1
        analytic = detector_efficiency(branch, ed, cut, QUAD)
        grid = fs.build_mode_grid(SpectralCutoffs(ed, cut.omega_max), 24, 24, 48)
        lam = np.abs(fs.project_current(branch.current, grid).alphas.ravel()) ** 2
        n_samples = 400_000
        rng = make_rng(14)
        fired = np.zeros(n_samples, dtype=bool)
        counts = rng.poisson(lam * n_samples)
        idx = rng.integers(0, n_samples, size=int(np.sum(counts)))
        fired[idx] = True
        mc = np.count_nonzero(fired) / n_samples
        assert abs(mc - analytic) <= 0.005


class TestReturnProbability:
    def test_full_sphere(self):
        est, (lo, hi) = return_probability(
            electron(), neutrino(), 1.0, 10_000, make_rng(15)
        )
        assert est == 1.0
        assert hi == 1.0

    def test_small_cap_rate(self):
        est, (lo, hi) = return_probability(
            electron(), neutrino(), 1e-3, 1_000_000, make_rng(16)
        )
        assert abs(est - 1e-3) <= 3e-4
        assert lo <= 1e-3 <= hi

    def test_deterministic(self):
        a = return_probability(electron(), neutrino(), 0.01, 50_000, make_rng(17))
        b = return_probability(electron(), neutrino(), 0.01, 50_000, make_rng(17))
        assert a == b

    def test_invalid_tolerance(self):
        with pytest.raises(InvalidTolerance):
            return_probability(electron(), neutrino(), 0.0, 10_000, make_rng(18))
        with pytest.raises(InvalidTolerance):
            return_probability(electron(), neutrino(), 1.5, 10_000, make_rng(18))

    def test_sample_floor(self):
        with pytest.raises(ValueError):
            return_probability(electron(), neutrino(), 0.1, 10, make_rng(19))

    def test_cloud_norm_grows_with_angular_gap(self):
        # the angular criterion stands in for the cloud-difference norm:
        # rescattered composite currents telescope, and the cloud norm of
        # the endpoint current grows strictly with the in/out angle
        e_in = electron()
        cut = SpectralCutoffs(1e-3, 1.0)
        mid = elastic_final_state(e_in, neutrino(), np.array([0.0, 1.0, 0.0])).e_out
        vals = []
        for ang in (10.0, 40.0, 80.0, 120.0, 170.0):
            th = math.radians(ang)
            fin = electron(direction=(math.sin(th), 0.0, math.cos(th)))
            chain = CompositeCurrent((e_in, mid, fin))
            vals.append(v_functional(chain, None, cut, QUAD))
        assert all(b > a for a, b in zip(vals, vals[1:]))


class TestWilson:
    def test_interval_basics(self):
        lo, hi = wilson_interval(50, 100)
        assert lo < 0.5 < hi
        lo0, hi0 = wilson_interval(0, 100)
        assert lo0 == 0.0 and hi0 > 0.0


class TestFockConsistency:
    def test_interference_bounded_by_grid_overlap(self):
        rng = make_rng(20)
        bset = build_branches(electron(1.25, 1.0), neutrino(1.25), 2, rng)
        cut = SpectralCutoffs(0.125, 1.25)
        grid = fs.build_mode_grid(cut, 8, 8, 16)
        b1, b2 = bset.branches
        a1 = fs.project_current(b1.current, grid)
        a2 = fs.project_current(b2.current, grid)
        n_max = max(
            fs.required_levels(float(np.max(np.abs(a1.alphas)))),
            fs.required_levels(float(np.max(np.abs(a2.alphas)))),
        )
        s1 = fs.displace_vacuum(a1, n_max)
        s2 = fs.displace_vacuum(a2, n_max)
        overlap = abs(fs.fock_overlap(s1, s2))
        for _ in range(20):
            ch = int(rng.integers(0, grid.n_channels))
            terms = [
                (complex(rng.normal(), rng.normal()), ((ch, 1, 0),)),
                (complex(rng.normal(), 0.0), ((ch, 1, 1),)),
            ]
            obs = fs.ObservableSpec.hermitized(terms)
            norm_b = fs.operator_norm(obs, n_max + 1)
            it = fs.interference_term(b1.weight, s1, b2.weight, s2, obs)
            bound = 2.0 * abs(b1.weight) * abs(b2.weight) * norm_b * overlap
            assert abs(it) <= bound + 1e-12
