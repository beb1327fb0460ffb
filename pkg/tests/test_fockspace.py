import math

import numpy as np
import pytest

import softbrems.fockspace as fs
from softbrems.errors import GridMismatch, NotHermitian, TruncationTooSmall
from softbrems.kinematics import EmissionCurrent, FourVector, ParticleState
from softbrems.radiation import (
    QuadratureSpec,
    SpectralCutoffs,
    mean_photon_number,
    overlap_magnitude,
    polarization_sum,
)
from softbrems.rng import make_rng

QUAD = QuadratureSpec()
FOCK_CUT = SpectralCutoffs(0.125, 1.25)


def electron(energy, mass=1.0, direction=(0.0, 0.0, 1.0)):
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    p = math.sqrt(energy**2 - mass**2)
    return ParticleState(FourVector(energy, *(p * d)), mass)


def gentle_current():
    return EmissionCurrent(electron(1.25), electron(1.25, direction=(1, 0, 0)))


def single_mode_state(alpha, n_max=None):
    alphas = np.array([[alpha]], dtype=complex)
    spec = fs.CoherentSpec(alphas)
    if n_max is None:
        n_max = fs.required_levels(abs(alpha))
    return fs.displace_vacuum(spec, n_max)


class TestModeGrid:
    def test_single_cell_measure(self):
        cut = SpectralCutoffs(0.1, 1.0)
        grid = fs.build_mode_grid(cut, 1, 1, 1)
        closed = 2.0 * math.pi * (cut.omega_max**2 - cut.omega_min**2)
        assert grid.total_measure() == pytest.approx(closed, rel=1e-12)
        assert grid.n_modes == 1

    def test_measure_partition_under_refinement(self):
        cut = SpectralCutoffs(0.1, 1.0)
        w1 = fs.build_mode_grid(cut, 4, 4, 8).total_measure()
        w2 = fs.build_mode_grid(cut, 4, 4, 16).total_measure()
        assert w1 == pytest.approx(w2, rel=1e-12)

    def test_default_window_measure(self):
        grid = fs.build_mode_grid(SpectralCutoffs(1e-3, 1.0), 8, 8, 16)
        assert grid.total_measure() == pytest.approx(
            grid.closed_form_measure(), rel=1e-12
        )

    def test_polarization_orthonormal(self):
        grid = fs.build_mode_grid(SpectralCutoffs(0.1, 1.0), 6, 6, 4)
        khat = grid.k[:, 1:] / grid.k[:, 0][:, None]
        e1, e2 = grid.pol[:, 0], grid.pol[:, 1]
        assert np.max(np.abs(np.sum(e1 * e1, axis=1) - 1.0)) < 1e-12
        assert np.max(np.abs(np.sum(e2 * e2, axis=1) - 1.0)) < 1e-12
        assert np.max(np.abs(np.sum(e1 * e2, axis=1))) < 1e-12
        assert np.max(np.abs(np.sum(e1 * khat, axis=1))) < 1e-12
        assert np.max(np.abs(np.sum(e2 * khat, axis=1))) < 1e-12

    def test_lightlike_centers(self):
        grid = fs.build_mode_grid(SpectralCutoffs(0.1, 1.0), 4, 4, 4)
        ksq = grid.k[:, 0] ** 2 - np.sum(grid.k[:, 1:] ** 2, axis=1)
        assert np.max(np.abs(ksq)) < 1e-12


class TestProjectCurrent:
    def test_zero_current(self):
        e = electron(1.25)
        grid = fs.build_mode_grid(FOCK_CUT, 4, 4, 8)
        spec = fs.project_current(EmissionCurrent(e, e), grid)
        assert np.all(spec.alphas == 0)

    def test_occupancy_matches_continuum(self):
        cur = gentle_current()
        grid = fs.build_mode_grid(FOCK_CUT, 16, 16, 32)
        occ = fs.project_current(cur, grid).total_occupancy()
        nbar = mean_photon_number(cur, FOCK_CUT, QUAD)
        assert occ == pytest.approx(nbar, rel=0.01)

    def test_occupancy_matches_contraction_route(self):
        cur = gentle_current()
        grid = fs.build_mode_grid(FOCK_CUT, 8, 8, 16)
        spec = fs.project_current(cur, grid)
        from softbrems.radiation import _leg_arrays

        e, px, py, pz, coeffs, _ = _leg_arrays(cur)
        den = (
            np.outer(grid.k[:, 0], e)
            - grid.k[:, 1][:, None] * px[None, :]
            - grid.k[:, 2][:, None] * py[None, :]
            - grid.k[:, 3][:, None] * pz[None, :]
        )
        r = coeffs[None, :] / den
        j4 = 1j * np.stack([r @ e, r @ px, r @ py, r @ pz], axis=1)
        contraction = sum(
            grid.weight[m] * polarization_sum(j4[m]) for m in range(grid.n_modes)
        )
        assert spec.total_occupancy() == pytest.approx(contraction, rel=1e-10)

    def test_z_rotation_leaves_amplitudes(self):
        # rotate momenta by one azimuthal cell: the grid maps onto itself
        n_phi = 8
        grid = fs.build_mode_grid(FOCK_CUT, 6, n_phi, 8)
        cur = gentle_current()
        th = 2.0 * math.pi / n_phi

        def rot(state):
            c, s = math.cos(th), math.sin(th)
            x, y, z = state.momentum.spatial
            return ParticleState(
                FourVector(state.momentum.t, c * x - s * y, s * x + c * y, z),
                state.mass,
            )

        rotated = EmissionCurrent(rot(cur.p_in), rot(cur.p_out))
        mags0 = np.sort(np.abs(fs.project_current(cur, grid).alphas).ravel())
        mags1 = np.sort(np.abs(fs.project_current(rotated, grid).alphas).ravel())
        assert np.max(np.abs(mags0 - mags1)) < 1e-9


class TestDisplaceVacuum:
    def test_zero_alpha_is_vacuum(self):
        state = single_mode_state(0.0)
        assert state.coeffs[0, 0, 0] == 1.0
        assert np.all(state.coeffs[0, 0, 1:] == 0.0)

    def test_ground_state_probability(self):
        state = single_mode_state(0.5, n_max=40)
        p0 = abs(state.coeffs[0, 0, 0]) ** 2
        assert p0 == pytest.approx(math.exp(-0.25), abs=1e-9)

    def test_mean_occupation(self):
        state = single_mode_state(0.5, n_max=40)
        n = np.arange(41)
        mean = float(np.sum(n * np.abs(state.coeffs[0, 0]) ** 2))
        assert mean == pytest.approx(0.25, abs=1e-10)

    def test_truncation_rule_enforced(self):
        with pytest.raises(TruncationTooSmall):
            single_mode_state(0.5, n_max=10)

    def test_leak_reported_and_bounded(self):
        state = single_mode_state(1.5)
        leaks = state.mode_leaks()
        assert leaks.shape == (1,)
        assert float(np.max(leaks)) <= fs.LEAK_BOUND


class TestBogoliubovResidual:
    def test_zero_alpha(self):
        spec = fs.CoherentSpec(np.zeros((1, 2), dtype=complex))
        assert fs.bogoliubov_residual(spec, 40) < 1e-12

    def test_half_alpha(self):
        spec = fs.CoherentSpec(np.array([[0.5 + 0.0j, 0.0j]]))
        assert fs.bogoliubov_residual(spec, 40) < 1e-8

    def test_full_block_artifact_larger(self):
        restricted, full = fs._single_channel_residual(0.5 + 0.0j, 40)
        assert full > restricted

    def test_truncation_guard(self):
        spec = fs.CoherentSpec(np.array([[2.0 + 0.0j, 0.0j]]))
        with pytest.raises(TruncationTooSmall):
            fs.bogoliubov_residual(spec, 20)

    def test_displacement_unitary_on_block(self):
        for alpha in (0.5, 1.0 + 0.5j, 2.0):
            d = fs.displacement_matrix(alpha, 41)
            gap = np.linalg.norm(d.conj().T @ d - np.eye(41), 2)
            assert gap < 1e-8


class TestFockOverlap:
    def test_self_overlap(self):
        state = single_mode_state(0.7)
        assert abs(fs.fock_overlap(state, state)) == pytest.approx(1.0, abs=1e-12)

    def test_vacuum_overlap_single_mode(self):
        s1 = single_mode_state(1.0, n_max=40)
        s0 = single_mode_state(0.0, n_max=40)
        got = abs(fs.fock_overlap(s1, s0))
        assert got == pytest.approx(math.exp(-0.5), abs=1e-9)

    def test_matches_continuum_overlap(self):
        cur = gentle_current()
        grid = fs.build_mode_grid(FOCK_CUT, 16, 16, 32)
        spec = fs.project_current(cur, grid)
        n_max = fs.required_levels(float(np.max(np.abs(spec.alphas))))
        state = fs.displace_vacuum(spec, n_max)
        vac = fs.displace_vacuum(fs.CoherentSpec(np.zeros_like(spec.alphas), grid), n_max)
        got = abs(fs.fock_overlap(state, vac))
        want = overlap_magnitude(cur, None, FOCK_CUT, QUAD)
        assert got == pytest.approx(want, rel=0.01)

    def test_coherent_pair_closed_form(self):
        rng = make_rng(17)
        grid = fs.build_mode_grid(SpectralCutoffs(0.1, 1.0), 4, 4, 8)
        shape = (grid.n_modes, 2)
        for _ in range(10):
            a = rng.normal(scale=0.3, size=shape) + 1j * rng.normal(scale=0.3, size=shape)
            b = rng.normal(scale=0.3, size=shape) + 1j * rng.normal(scale=0.3, size=shape)
            n_max = fs.required_levels(float(max(np.max(np.abs(a)), np.max(np.abs(b)))))
            sa = fs.displace_vacuum(fs.CoherentSpec(a, grid), min(n_max, 60))
            sb = fs.displace_vacuum(fs.CoherentSpec(b, grid), min(n_max, 60))
            got = abs(fs.fock_overlap(sa, sb))
            want = math.exp(-0.5 * float(np.sum(np.abs(a - b) ** 2)))
            leak = float(np.sum(sa.mode_leaks()) + np.sum(sb.mode_leaks()))
            assert abs(got - want) <= 10.0 * leak + 1e-12

    def test_grid_mismatch(self):
        g1 = fs.build_mode_grid(SpectralCutoffs(0.1, 1.0), 2, 2, 2)
        g2 = fs.build_mode_grid(SpectralCutoffs(0.1, 1.0), 2, 2, 4)
        s1 = fs.displace_vacuum(
            fs.CoherentSpec(np.zeros((g1.n_modes, 2), dtype=complex), g1), 12
        )
        s2 = fs.displace_vacuum(
            fs.CoherentSpec(np.zeros((g2.n_modes, 2), dtype=complex), g2), 12
        )
        with pytest.raises(GridMismatch):
            fs.fock_overlap(s1, s2)
        s3 = fs.displace_vacuum(
            fs.CoherentSpec(np.zeros((g1.n_modes, 2), dtype=complex), g1), 14
        )
        with pytest.raises(GridMismatch):
            fs.fock_overlap(s1, s3)


def number_op(channel=0):
    return fs.ObservableSpec(((1.0 + 0.0j, ((channel, 1, 1),)),))


class TestObservableExpectation:
    def test_number_operator(self):
        state = single_mode_state(0.5, n_max=40)
        assert fs.observable_expectation(state, number_op()) == pytest.approx(
            0.25, abs=1e-9
        )

    def test_quadrature_mean(self):
        state = single_mode_state(0.3, n_max=40)
        obs = fs.ObservableSpec(
            ((1.0 + 0.0j, ((0, 1, 0),)), (1.0 + 0.0j, ((0, 0, 1),)))
        )
        assert fs.observable_expectation(state, obs) == pytest.approx(0.6, abs=1e-9)

    def test_dense_matrix_oracle_two_modes(self):
        rng = make_rng(23)
        alphas = np.array([[0.4 + 0.2j], [0.1 - 0.3j]])
        spec = fs.CoherentSpec(alphas)
        n_max = fs.required_levels(0.5)
        state = fs.displace_vacuum(spec, n_max)
        for _ in range(10):
            terms = []
            for _ in range(int(rng.integers(1, 4))):
                ops = []
                for ch in range(2):
                    if rng.random() < 0.8:
                        r = int(rng.integers(0, 3))
                        s = int(rng.integers(0, 3 - r))
                        ops.append((ch, r, s))
                terms.append((complex(rng.normal(), rng.normal()), tuple(ops)))
            obs = fs.ObservableSpec.hermitized(terms)
            got = fs.observable_expectation(state, obs)
            dense = fs.dense_matrix(obs, n_max + 1, channels=(0, 1))
            vec = np.kron(state.coeffs[0, 0], state.coeffs[0, 1])
            want = float(np.real(np.vdot(vec, dense @ vec) / np.vdot(vec, vec)))
            assert got == pytest.approx(want, abs=1e-9)

    def test_not_hermitian_rejected(self):
        with pytest.raises(NotHermitian):
            fs.ObservableSpec(((1.0 + 0.0j, ((0, 1, 0),)),))

    def test_mode_factorization(self):
        # a single-channel observable ignores what other channels hold
        base = np.array([[0.3 + 0.1j], [0.2 - 0.4j], [0.5 + 0.0j]])
        n_max = fs.required_levels(0.7)
        s1 = fs.displace_vacuum(fs.CoherentSpec(base), n_max)
        other = base.copy()
        other[1:] = np.array([[0.6 - 0.2j], [0.1 + 0.1j]])
        s2 = fs.displace_vacuum(fs.CoherentSpec(other), n_max)
        obs = number_op(0)
        v1 = fs.observable_expectation(s1, obs)
        v2 = fs.observable_expectation(s2, obs)
        assert v1 == pytest.approx(v2, abs=1e-12)


class TestInterferenceTerm:
    def test_identical_states_fully_coherent(self):
        state = single_mode_state(0.5, n_max=40)
        obs = number_op()
        c1, c2 = 0.6 + 0.0j, 0.8j
        it = fs.interference_term(c1, state, c2, state, obs)
        expected = 2.0 * (np.conj(c1) * c2).real * fs.observable_expectation(state, obs)
        assert it == pytest.approx(expected, abs=1e-12)

    def test_separated_clouds_bounded(self):
        s1 = single_mode_state(0.0, n_max=75)
        s2 = single_mode_state(math.sqrt(20.0), n_max=75)
        rng = make_rng(29)
        c1, c2 = complex(1 / math.sqrt(2)), complex(1 / math.sqrt(2))
        overlap = abs(fs.fock_overlap(s1, s2))
        assert overlap == pytest.approx(math.exp(-10.0), rel=1e-9)
        for _ in range(20):
            terms = [
                (complex(rng.normal(), rng.normal()), ((0, int(rng.integers(0, 3)), int(rng.integers(0, 3))),))
                for _ in range(2)
            ]
            obs = fs.ObservableSpec.hermitized(terms)
            norm_b = fs.operator_norm(obs, 76)
            it = fs.interference_term(c1, s1, c2, s2, obs)
            assert abs(it) <= 2.0 * abs(c1) * abs(c2) * norm_b * overlap + 1e-12

    def test_bound_property_random(self):
        rng = make_rng(31)
        for _ in range(100):
            n_ch = int(rng.integers(1, 3))
            a = rng.normal(scale=0.6, size=n_ch) + 1j * rng.normal(scale=0.6, size=n_ch)
            b = rng.normal(scale=0.6, size=n_ch) + 1j * rng.normal(scale=0.6, size=n_ch)
            n_max = fs.required_levels(float(max(np.max(np.abs(a)), np.max(np.abs(b)))))
            s1 = fs.displace_vacuum(fs.CoherentSpec(a.reshape(-1, 1)), n_max)
            s2 = fs.displace_vacuum(fs.CoherentSpec(b.reshape(-1, 1)), n_max)
            terms = []
            for _ in range(int(rng.integers(1, 3))):
                ops = []
                for ch in range(n_ch):
                    r = int(rng.integers(0, 3))
                    s = int(rng.integers(0, 3 - r))
                    if (r, s) != (0, 0):
                        ops.append((ch, r, s))
                terms.append((complex(rng.normal(), rng.normal()), tuple(ops)))
            obs = fs.ObservableSpec.hermitized(terms)
            norm_b = fs.operator_norm(obs, n_max + 1)
            th = rng.uniform(0, math.pi / 2)
            c1, c2 = complex(math.cos(th)), complex(math.sin(th))
            it = fs.interference_term(c1, s1, c2, s2, obs)
            bound = 2.0 * abs(c1) * abs(c2) * norm_b * abs(fs.fock_overlap(s1, s2))
            assert abs(it) <= bound + 1e-12

    def test_term_cap(self):
        state = single_mode_state(0.2)
        many = fs.TruncatedFockState(
            n_max=state.n_max,
            weights=np.ones(33, dtype=complex),
            coeffs=np.repeat(state.coeffs, 33, axis=0),
            grid=None,
        )
        with pytest.raises(ValueError):
            fs.superpose(1.0, many, 1.0, many)


class TestOperatorNorm:
    def test_ladder_norm(self):
        obs = fs.ObservableSpec(
            ((1.0 + 0.0j, ((0, 1, 0),)), (1.0 + 0.0j, ((0, 0, 1),)))
        )
        n_levels = 12
        dense = fs.dense_matrix(obs, n_levels)
        want = float(np.max(np.abs(np.linalg.eigvalsh(dense))))
        assert fs.operator_norm(obs, n_levels) == pytest.approx(want, rel=1e-9)

    def test_power_iteration_path(self):
        obs = fs.ObservableSpec.hermitized(
            [(0.7 + 0.2j, ((0, 1, 0), (1, 0, 1), (2, 1, 1)))]
        )
        n_levels = 14  # 14^3 dim, beyond the dense threshold
        est = fs.operator_norm(obs, n_levels, dense_limit=64)
        dense = fs.dense_matrix(obs, n_levels, channels=(0, 1, 2))
        want = float(np.max(np.abs(np.linalg.eigvalsh(dense))))
        assert est == pytest.approx(want, rel=5e-5)
        assert est <= want * (1.0 + 1e-9)

    def test_upper_bound_dominates(self):
        obs = fs.ObservableSpec.hermitized(
            [(1.0 + 0.5j, ((0, 2, 1),)), (0.3 + 0.0j, ((0, 1, 1),))]
        )
        assert fs.operator_norm_upper(obs, 20) >= fs.operator_norm(obs, 20) - 1e-9

    def test_scale_to_norm_bound(self):
        obs = fs.ObservableSpec.hermitized([(2.0 + 1.0j, ((0, 1, 0),))])
        scaled = fs.scale_to_norm_bound(obs, 15, 10.0)
        assert fs.operator_norm_upper(scaled, 15) == pytest.approx(10.0, rel=1e-12)
        assert fs.operator_norm(scaled, 15) <= 10.0 + 1e-9
