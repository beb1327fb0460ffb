"""Brute-force truncated Fock space on a discretized photon mode grid.

The continuum functionals in :mod:`softbrems.radiation` have closed forms
because the radiated state is coherent.  This module rebuilds the same
objects the hard way - per-mode level vectors up to a cap n_max - so the
closed forms can be validated on small instances:

* a mode grid partitions the cutoff window into cells with exact
  phase-space measure, each carrying a lightlike center and two transverse
  polarization vectors;
* a current projects onto per-mode coherent amplitudes
  alpha = BOGOLIUBOV_SIGN * i * sqrt(w) * (Jvec . eps);
* displacing the vacuum gives the product coherent state, and the
  displacement matrices realize the operator shift  D^ a D = a + alpha,
  pinned numerically by :func:`bogoliubov_residual`;
* overlaps, Hermitian-observable expectations and two-branch interference
  terms are evaluated exactly (to truncation leak) on product states or
  small entangled sums of product states.

Each (mode, polarization) pair is one independent bosonic channel;
channel order is mode-major with the two polarizations adjacent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import GridMismatch, NotHermitian, TruncationTooSmall
from .radiation import SpectralCutoffs, _leg_arrays

#: sign convention tying the coherent amplitude to the current projection;
#: +1 means alpha = +i sqrt(w) (Jvec . eps), so that displacing the vacuum
#: by alpha realizes the operator shift a -> a + alpha with alpha = i J.
BOGOLIUBOV_SIGN = 1.0

#: per-channel truncation leak bound enforced by the level-cap rule
LEAK_BOUND = 1e-10

#: refusal cap for entangled sums of product states
MAX_TERMS = 64


@dataclass(frozen=True, eq=False)
class ModeGrid:
    """Cell-centered discretization of the photon phase space.

    weights carry the exact cell measure Int omega domega dOmega, so their
    sum telescopes to the closed-form window measure
    2 pi (omega_max^2 - omega_min^2).
    """

    k: np.ndarray          # (M, 4) lightlike cell centers
    weight: np.ndarray     # (M,) exact cell measures
    pol: np.ndarray        # (M, 2, 3) orthonormal transverse basis
    cutoffs: SpectralCutoffs
    shape: tuple[int, int, int]  # (n_omega, n_cos, n_phi)

    @property
    def n_modes(self) -> int:
        return self.k.shape[0]

    @property
    def n_channels(self) -> int:
        return 2 * self.n_modes

    def total_measure(self) -> float:
        return float(np.sum(self.weight))

    def closed_form_measure(self) -> float:
        c = self.cutoffs
        return 2.0 * math.pi * (c.omega_max**2 - c.omega_min**2)

    def same_grid(self, other: "ModeGrid | None") -> bool:
        if other is None:
            return False
        return (
            self.shape == other.shape
            and self.cutoffs == other.cutoffs
            and np.array_equal(self.k, other.k)
            and np.array_equal(self.weight, other.weight)
        )


def build_mode_grid(
    cutoffs: SpectralCutoffs, n_cos: int, n_phi: int, n_omega: int
) -> ModeGrid:
    """Cell-centered mode grid: log-spaced in omega, uniform in cos and phi.

    Cell centers are geometric in omega and arithmetic in the angles; the
    weight is the exact cell measure, never a midpoint approximation.
    """
    if min(n_cos, n_phi, n_omega) < 1:
        raise ValueError("node counts must be >= 1")
    om_edges = np.geomspace(cutoffs.omega_min, cutoffs.omega_max, n_omega + 1)
    cos_edges = np.linspace(-1.0, 1.0, n_cos + 1)
    phi_edges = np.linspace(0.0, 2.0 * math.pi, n_phi + 1)

    om_c = np.sqrt(om_edges[:-1] * om_edges[1:])
    om_m = 0.5 * (om_edges[1:] ** 2 - om_edges[:-1] ** 2)
    cos_c = 0.5 * (cos_edges[:-1] + cos_edges[1:])
    dcos = np.diff(cos_edges)
    phi_c = 0.5 * (phi_edges[:-1] + phi_edges[1:])
    dphi = np.diff(phi_edges)

    omg, cosg, phig = np.meshgrid(om_c, cos_c, phi_c, indexing="ij")
    omg, cosg, phig = omg.ravel(), cosg.ravel(), phig.ravel()
    sing = np.sqrt(np.clip(1.0 - cosg * cosg, 0.0, None))
    nd = np.column_stack((sing * np.cos(phig), sing * np.sin(phig), cosg))
    k = np.column_stack((omg, omg[:, None] * nd))

    wg = np.einsum("i,j,l->ijl", om_m, dcos, dphi).ravel()

    # transverse basis: z-reference everywhere (cell centers never hit the poles)
    ref = np.zeros_like(nd)
    polar = np.abs(nd[:, 2]) >= 0.99999
    ref[:, 2] = np.where(polar, 0.0, 1.0)
    ref[:, 0] = np.where(polar, 1.0, 0.0)
    e1 = np.cross(ref, nd)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(nd, e1)
    return ModeGrid(
        k=k,
        weight=wg,
        pol=np.stack((e1, e2), axis=1),
        cutoffs=cutoffs,
        shape=(n_omega, n_cos, n_phi),
    )


@dataclass(frozen=True, eq=False)
class CoherentSpec:
    """Per-mode, per-polarization coherent amplitudes of a projected current."""

    alphas: np.ndarray  # (M, 2) complex
    grid: ModeGrid | None = None

    @property
    def channel_alphas(self) -> np.ndarray:
        return self.alphas.reshape(-1)

    def total_occupancy(self) -> float:
        """Sum of |alpha|^2; converges to the continuum photon number."""
        return float(np.sum(np.abs(self.alphas) ** 2))


def project_current(current, grid: ModeGrid) -> CoherentSpec:
    """Coherent amplitudes of `current` on the grid's channels."""
    e, px, py, pz, coeffs, _ = _leg_arrays(current)
    if e.size == 0:
        return CoherentSpec(np.zeros((grid.n_modes, 2), dtype=complex), grid)
    # p.k per (mode, leg), then Jvec = i sum_l C_l pvec_l / (p_l.k)
    den = (
        np.outer(grid.k[:, 0], e)
        - grid.k[:, 1][:, None] * px[None, :]
        - grid.k[:, 2][:, None] * py[None, :]
        - grid.k[:, 3][:, None] * pz[None, :]
    )
    r = coeffs[None, :] / den
    # einsum keeps leg summation sequential, so equal-and-opposite legs
    # cancel exactly (a BLAS matvec would leave FMA residue)
    jvec = 1j * np.stack(
        [
            np.einsum("ml,l->m", r, px),
            np.einsum("ml,l->m", r, py),
            np.einsum("ml,l->m", r, pz),
        ],
        axis=1,
    )
    proj = np.einsum("mi,mpi->mp", jvec, grid.pol)
    alphas = BOGOLIUBOV_SIGN * 1j * np.sqrt(grid.weight)[:, None] * proj
    return CoherentSpec(alphas, grid)


def required_levels(alpha: complex) -> int:
    """Level cap making the coherent occupation tail smaller than LEAK_BOUND."""
    a = abs(alpha)
    return int(math.ceil(a * a + 10.0 * a + 10.0))


@dataclass(frozen=True, eq=False)
class TruncatedFockState:
    """Multi-channel photon state with per-channel level vectors.

    Stored as a sum of at most MAX_TERMS product states: `weights[t]` times
    the product over channels of the level vector `coeffs[t, ch, :]`.
    """

    n_max: int
    weights: np.ndarray  # (T,) complex
    coeffs: np.ndarray   # (T, C, n_max + 1) complex
    grid: ModeGrid | None = None

    def __post_init__(self):
        if self.weights.shape[0] != self.coeffs.shape[0]:
            raise ValueError("term count mismatch between weights and coeffs")
        if self.weights.shape[0] > MAX_TERMS:
            raise ValueError(
                f"entangled sums are capped at {MAX_TERMS} product terms"
            )
        if self.coeffs.shape[2] != self.n_max + 1:
            raise ValueError("level axis must have n_max + 1 entries")

    @property
    def n_terms(self) -> int:
        return self.weights.shape[0]

    @property
    def n_channels(self) -> int:
        return self.coeffs.shape[1]

    def norm_sq(self) -> float:
        return float(_raw_inner(self, self).real)

    def mode_leaks(self) -> np.ndarray:
        """Per-channel truncation leak 1 - sum_n |c_n|^2 (product states only)."""
        if self.n_terms != 1:
            raise ValueError("per-channel leak is defined for product states")
        occ = np.sum(np.abs(self.coeffs[0]) ** 2, axis=1)
        return np.clip(1.0 - occ, 0.0, None)


def displace_vacuum(spec: CoherentSpec, n_max: int) -> TruncatedFockState:
    """Product coherent state c_n = e^{-|a|^2/2} a^n / sqrt(n!) per channel.

    Raises TruncationTooSmall unless n_max satisfies the level-cap rule for
    every channel (which bounds each truncation leak by LEAK_BOUND).
    """
    alphas = spec.channel_alphas
    need = required_levels(np.max(np.abs(alphas)) if alphas.size else 0.0)
    if n_max < need:
        raise TruncationTooSmall(
            f"n_max = {n_max} below the level-cap rule ({need} required)"
        )
    c = np.zeros((alphas.size, n_max + 1), dtype=complex)
    c[:, 0] = np.exp(-0.5 * np.abs(alphas) ** 2)
    for n in range(1, n_max + 1):
        c[:, n] = c[:, n - 1] * alphas / math.sqrt(n)
    state = TruncatedFockState(
        n_max=n_max,
        weights=np.array([1.0 + 0.0j]),
        coeffs=c[None, :, :],
        grid=spec.grid,
    )
    worst = float(np.max(state.mode_leaks())) if alphas.size else 0.0
    if worst > LEAK_BOUND:
        raise TruncationTooSmall(
            f"truncation leak {worst:.3e} exceeds bound {LEAK_BOUND:g}"
        )
    return state


def superpose(
    c1: complex, s1: TruncatedFockState, c2: complex, s2: TruncatedFockState
) -> TruncatedFockState:
    """The (unnormalized) combination c1*s1 + c2*s2 as one entangled sum."""
    _require_compatible(s1, s2)
    weights = np.concatenate([c1 * s1.weights, c2 * s2.weights])
    coeffs = np.concatenate([s1.coeffs, s2.coeffs], axis=0)
    return TruncatedFockState(s1.n_max, weights, coeffs, s1.grid)


# ---------------------------------------------------------------------------
# ladder operators and displacement matrices
# ---------------------------------------------------------------------------


@lru_cache(maxsize=512)
def _ladder(n_levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_levels, dtype=float)), 1)


@lru_cache(maxsize=512)
def ladder_matrix(n_levels: int, r: int, s: int) -> np.ndarray:
    """Dense matrix of (a^dagger)^r a^s on a truncated channel space."""
    a = _ladder(n_levels)
    return np.linalg.matrix_power(a.T, r).astype(complex) @ np.linalg.matrix_power(
        a, s
    ).astype(complex)


def displacement_matrix(alpha: complex, n_levels: int) -> np.ndarray:
    """exp(alpha a^dagger - alpha* a) on the truncated channel space."""
    a = _ladder(n_levels)
    k = alpha * a.T - np.conj(alpha) * a
    h = -1j * k  # Hermitian generator
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w)) @ v.conj().T


def bogoliubov_residual(spec: CoherentSpec, n_max: int) -> float:
    """Max over channels of ||D^ a D - (a + alpha)|| on the block n <= n_max - 5.

    A residual near zero pins the displacement convention to the coherent
    amplitudes produced by :func:`project_current`.  The hard level cutoff
    corrupts the operator product near the top of the space, and the
    corruption decays only like |alpha|/sqrt(n) per level, so the truncated
    matrices are built on a workspace padded past n_max; the reported norm
    is restricted to the requested block.  Evaluating on the full workspace
    block instead picks up the cutoff artifact and is strictly larger
    (asserted by the tests as a documented edge effect).
    """
    alphas = spec.channel_alphas
    need = required_levels(np.max(np.abs(alphas)) if alphas.size else 0.0)
    if n_max < max(need, 6):
        raise TruncationTooSmall(
            f"n_max = {n_max} below the level-cap rule ({max(need, 6)} required)"
        )
    worst = 0.0
    for alpha in alphas:
        worst = max(worst, _single_channel_residual(complex(alpha), n_max)[0])
    return worst


def _single_channel_residual(alpha: complex, n_max: int) -> tuple[float, float]:
    """(restricted-block, full-workspace) displacement residual for one channel."""
    # cutoff corruption penetrates ~15|alpha| levels; pad well past that
    a_mag = abs(alpha)
    pad = 30 + int(math.ceil(15.0 * a_mag + 2.0 * a_mag * a_mag))
    n_work = n_max + 1 + pad
    a = _ladder(n_work).astype(complex)
    d = displacement_matrix(alpha, n_work)
    r = d.conj().T @ a @ d - a - alpha * np.eye(n_work)
    m = n_max - 5 + 1
    restricted = float(np.linalg.norm(r[:m, :m], 2))
    full = float(np.linalg.norm(r, 2))
    return restricted, full


# ---------------------------------------------------------------------------
# overlaps, observables, interference
# ---------------------------------------------------------------------------


def _require_compatible(s1: TruncatedFockState, s2: TruncatedFockState) -> None:
    if s1.n_max != s2.n_max or s1.n_channels != s2.n_channels:
        raise GridMismatch("states differ in level cap or channel count")
    if (s1.grid is None) != (s2.grid is None):
        raise GridMismatch("one state carries a grid, the other does not")
    if s1.grid is not None and not s1.grid.same_grid(s2.grid):
        raise GridMismatch("states were built on different mode grids")


def _raw_inner(s1: TruncatedFockState, s2: TruncatedFockState) -> complex:
    total = 0.0 + 0.0j
    for t in range(s1.n_terms):
        for u in range(s2.n_terms):
            per = np.einsum("cn,cn->c", np.conj(s1.coeffs[t]), s2.coeffs[u])
            total += np.conj(s1.weights[t]) * s2.weights[u] * np.prod(per)
    return complex(total)


def fock_overlap(s1: TruncatedFockState, s2: TruncatedFockState) -> complex:
    """<s1|s2> as a product over channels (and sum over product terms)."""
    _require_compatible(s1, s2)
    return _raw_inner(s1, s2)


@dataclass(frozen=True)
class ObservableSpec:
    """Hermitian observable: a finite sum of per-channel ladder monomials.

    Each term is (coeff, ops) with ops a tuple of (channel, r, s) entries,
    one per distinct channel, meaning coeff * prod_ch (a^dagger)^r a^s.
    Construction canonicalizes terms and rejects non-self-adjoint specs.
    """

    terms: tuple[tuple[complex, tuple[tuple[int, int, int], ...]], ...]
    support: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        canon = _canonical_terms(self.terms)
        object.__setattr__(self, "terms", canon)
        _check_hermitian(canon)
        chans = sorted({ch for _, ops in canon for ch, _, _ in ops})
        object.__setattr__(self, "support", tuple(chans))

    @classmethod
    def hermitized(cls, terms) -> "ObservableSpec":
        """(T + T^dagger)/2 for an arbitrary monomial-sum T."""
        sym = []
        for coeff, ops in terms:
            sym.append((0.5 * coeff, tuple(ops)))
            sym.append(
                (0.5 * np.conj(coeff), tuple((ch, s, r) for ch, r, s in ops))
            )
        return cls(tuple(sym))


def _canonical_terms(terms):
    merged: dict[tuple, complex] = {}
    for coeff, ops in terms:
        ops = tuple(sorted((int(c), int(r), int(s)) for c, r, s in ops))
        chans = [c for c, _, _ in ops]
        if len(set(chans)) != len(chans):
            raise ValueError("a channel may appear at most once per term")
        if any(r < 0 or s < 0 for _, r, s in ops):
            raise ValueError("ladder powers must be non-negative")
        ops = tuple((c, r, s) for c, r, s in ops if (r, s) != (0, 0))
        merged[ops] = merged.get(ops, 0.0 + 0.0j) + complex(coeff)
    out = tuple(
        (coeff, ops) for ops, coeff in sorted(merged.items()) if abs(coeff) > 0.0
    )
    if not out:
        out = ((0.0 + 0.0j, ()),)
    return out


def _check_hermitian(terms) -> None:
    table = {ops: coeff for coeff, ops in terms}
    scale = max(abs(c) for c in table.values()) or 1.0
    for ops, coeff in table.items():
        conj_ops = tuple(sorted((c, s, r) for c, r, s in ops))
        other = table.get(conj_ops)
        if other is None or abs(np.conj(coeff) - other) > 1e-12 * scale:
            raise NotHermitian(
                f"term {ops} has no conjugate partner of matching weight"
            )


def _raw_matrix_element(
    s1: TruncatedFockState, s2: TruncatedFockState, obs: ObservableSpec
) -> complex:
    if obs.support and obs.support[-1] >= s1.n_channels:
        raise ValueError("observable support exceeds the state's channels")
    n_levels = s1.n_max + 1
    total = 0.0 + 0.0j
    for t in range(s1.n_terms):
        for u in range(s2.n_terms):
            bra, ket = s1.coeffs[t], s2.coeffs[u]
            per = np.einsum("cn,cn->c", np.conj(bra), ket)
            for coeff, ops in obs.terms:
                val = complex(coeff)
                mask = np.ones(s1.n_channels, dtype=bool)
                for ch, r, s in ops:
                    mat = ladder_matrix(n_levels, r, s)
                    val *= np.vdot(bra[ch], mat @ ket[ch])
                    mask[ch] = False
                val *= np.prod(per[mask])
                total += np.conj(s1.weights[t]) * s2.weights[u] * val
    return complex(total)


def observable_expectation(state: TruncatedFockState, obs: ObservableSpec) -> float:
    """Normalized real expectation <state|B|state> / <state|state>."""
    raw = _raw_matrix_element(state, state, obs)
    norm = _raw_inner(state, state).real
    val = raw / norm
    if abs(val.imag) > 1e-9 * (1.0 + abs(val.real)):
        raise NotHermitian(
            f"expectation has imaginary leak {val.imag:.3e}"
        )
    return float(val.real)


def interference_term(
    c1: complex,
    s1: TruncatedFockState,
    c2: complex,
    s2: TruncatedFockState,
    obs: ObservableSpec,
) -> float:
    """Excess of the superposition expectation over the weighted mixture.

    For Psi = c1 s1 + c2 s2 with normalized s1, s2 this is
    <Psi|B|Psi> - (|c1|^2 <s1|B|s1> + |c2|^2 <s2|B|s2>)
    = 2 Re(c1* c2 <s1|B|s2>), the cross term a mixture cannot produce.
    """
    _require_compatible(s1, s2)
    for s in (s1, s2):
        if abs(s.norm_sq() - 1.0) > 1e-6:
            raise ValueError("interference_term expects normalized states")
    psi = superpose(c1, s1, c2, s2)
    raw_pure = _raw_matrix_element(psi, psi, obs)
    mixture = (
        abs(c1) ** 2 * _raw_matrix_element(s1, s1, obs).real
        + abs(c2) ** 2 * _raw_matrix_element(s2, s2, obs).real
    )
    val = raw_pure - mixture
    if abs(val.imag) > 1e-9 * (1.0 + abs(val.real)):
        raise NotHermitian(f"interference term has imaginary leak {val.imag:.3e}")
    return float(val.real)


# ---------------------------------------------------------------------------
# operator norms
# ---------------------------------------------------------------------------


def dense_matrix(obs: ObservableSpec, n_levels: int, channels=None) -> np.ndarray:
    """Dense matrix of the observable on the product of the given channels."""
    chans = list(channels) if channels is not None else list(obs.support)
    if not chans:
        chans = [0]
    index = {ch: i for i, ch in enumerate(chans)}
    dim = n_levels ** len(chans)
    out = np.zeros((dim, dim), dtype=complex)
    eye = np.eye(n_levels, dtype=complex)
    for coeff, ops in obs.terms:
        mats = [eye] * len(chans)
        for ch, r, s in ops:
            if ch not in index:
                raise ValueError(f"channel {ch} not in the requested channel list")
            mats[index[ch]] = ladder_matrix(n_levels, r, s)
        term = np.array([[coeff]], dtype=complex)
        for m in mats:
            term = np.kron(term, m)
        out += term
    return out


def operator_norm(
    obs: ObservableSpec, n_levels: int, dense_limit: int = 2048, iters: int = 400
) -> float:
    """Spectral norm of the observable on its support channels.

    Dense eigensolve below `dense_limit` total dimension, deterministic
    power iteration on the structured tensor form above it (a slight
    under-estimate when the spectral gap is small, which only tightens the
    inequalities it feeds).
    """
    chans = list(obs.support) if obs.support else [0]
    dim = n_levels ** len(chans)
    if dim <= dense_limit:
        mat = dense_matrix(obs, n_levels, chans)
        return float(np.max(np.abs(np.linalg.eigvalsh(mat))))
    index = {ch: i for i, ch in enumerate(chans)}
    shape = (n_levels,) * len(chans)
    v = (1.0 + 0.001 * np.arange(dim)).astype(complex).reshape(shape)
    v /= np.linalg.norm(v)

    def apply(x):
        out = np.zeros_like(x)
        for coeff, ops in obs.terms:
            y = x
            for ch, r, s in ops:
                ax = index[ch]
                mat = ladder_matrix(n_levels, r, s)
                y = np.moveaxis(np.tensordot(mat, y, axes=([1], [ax])), 0, ax)
            out = out + coeff * y
        return out

    est = 0.0
    for _ in range(iters):
        w = apply(apply(v))  # iterate on B^2: robust to +/- eigenvalue pairs
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        est = math.sqrt(nw)
        v = w / nw
    return float(est)


def operator_norm_upper(obs: ObservableSpec, n_levels: int) -> float:
    """Rigorous norm upper bound: sum_t |coeff| prod_ch ||op_ch||."""
    total = 0.0
    for coeff, ops in obs.terms:
        part = abs(coeff)
        for _, r, s in ops:
            part *= float(np.linalg.norm(ladder_matrix(n_levels, r, s), 2))
        total += part
    return total


def scale_to_norm_bound(
    obs: ObservableSpec, n_levels: int, bound: float
) -> ObservableSpec:
    """Rescale so the rigorous upper bound equals `bound` (true norm <= bound)."""
    ub = operator_norm_upper(obs, n_levels)
    if ub == 0.0:
        return obs
    f = bound / ub
    return ObservableSpec(tuple((coeff * f, ops) for coeff, ops in obs.terms))
