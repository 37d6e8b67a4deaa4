"""One-period propagators, Bloch-sector reduction and quasienergy spectra.

Quasienergies follow ``U |psi> = exp(+i eps) |psi>`` and are reported as
principal arguments in (-pi, pi].
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .errors import BoundaryError, ContinuationAmbiguity, ConvergenceError
from .fock import FockBasis, SeedDecomposition
from .hamiltonian import (
    Chain,
    LatticeTerms,
    ModelParams,
    SectorTerms,
    _check_sector_compatible,
    to_dense,
)

Scheme = Literal["cf4", "midpoint"]

# fourth-order commutator-free Magnus: Gauss nodes and mixing weights
_GAUSS = (0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6)
_CF4_A = ((3 - 2 * math.sqrt(3)) / 12, (3 + 2 * math.sqrt(3)) / 12)

# stacks of matrices are processed in chunks of roughly this many bytes
_CHUNK_BYTES = 48 * 2**20


def default_slices(params: ModelParams) -> int:
    return 128 * params.b * max(params.a, 1)


@dataclass(frozen=True)
class PropagatorSettings:
    """Time discretisation of the one-period propagator.

    ``slices_per_period=None`` picks ``128 b max(a, 1)``, twice the minimum
    that resolves both drive tones.  ``scheme="cf4"`` is the fourth-order
    commutator-free Magnus product; ``"midpoint"`` the second-order midpoint
    product.  Both are products of exact unitary exponentials.
    """

    slices_per_period: int | None = None
    scheme: Scheme = "cf4"
    convergence_tol: float = 1e-9
    check_convergence: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.scheme not in ("cf4", "midpoint"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.slices_per_period is not None and self.slices_per_period < 1:
            raise ValueError("slices_per_period must be positive")

    def slices(self, params: ModelParams) -> int:
        return self.slices_per_period or default_slices(params)

    def doubled(self, params: ModelParams) -> "PropagatorSettings":
        return PropagatorSettings(
            2 * self.slices(params), self.scheme, self.convergence_tol, False, self.threads
        )


def expm_hermitian(h: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i h dt)`` for a (stack of) Hermitian matrices via eigh."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * dt * w)[..., None, :]) @ np.swapaxes(v, -1, -2).conj()


def time_ordered_product(
    hamiltonian: Callable[[float], np.ndarray],
    T: float,
    slices: int,
    scheme: Scheme = "cf4",
    t0: float = 0.0,
    initial: np.ndarray | None = None,
) -> np.ndarray:
    """Product of slice exponentials over ``[t0, t0 + T]``, latest on the left.

    ``hamiltonian(t)`` returns a Hermitian matrix or a stack of them; the
    result has the same shape.
    """
    dt = T / slices
    U = initial
    for k in range(slices):
        t = t0 + k * dt
        if scheme == "midpoint":
            step = expm_hermitian(hamiltonian(t + 0.5 * dt), dt)
        else:
            h1 = hamiltonian(t + _GAUSS[0] * dt)
            h2 = hamiltonian(t + _GAUSS[1] * dt)
            first = expm_hermitian(_CF4_A[1] * h1 + _CF4_A[0] * h2, dt)
            second = expm_hermitian(_CF4_A[0] * h1 + _CF4_A[1] * h2, dt)
            step = second @ first
        U = step if U is None else step @ U
    return U


def eigenphases(U: np.ndarray) -> np.ndarray:
    return np.angle(np.linalg.eigvals(U))


def floquet_eigensystem(U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenphases and orthonormal eigenvectors of a unitary (or a stack).

    Uses the complex Schur form, which is diagonal for normal matrices, so
    degenerate eigenspaces still come back orthonormal.
    """
    U = np.asarray(U)
    if U.ndim == 2:
        T, Z = sla.schur(U, output="complex")
        return np.angle(np.diag(T)), Z
    flat = U.reshape((-1,) + U.shape[-2:])
    phases = np.empty(flat.shape[:2])
    vecs = np.empty(flat.shape, dtype=complex)
    for i, u in enumerate(flat):
        phases[i], vecs[i] = floquet_eigensystem(u)
    return phases.reshape(U.shape[:-1]), vecs.reshape(U.shape)


def phase_set_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two sets of points on the circle."""
    diff = np.abs(np.angle(np.exp(1j * (np.asarray(a)[..., :, None] - np.asarray(b)[..., None, :]))))
    return float(max(diff.min(axis=-1).max(), diff.min(axis=-2).max()))


def _check_convergence(compute, params, settings, result):
    if not settings.check_convergence:
        return
    refined = compute(settings.doubled(params))
    dev = phase_set_distance(eigenphases(result), eigenphases(refined))
    if dev > settings.convergence_tol:
        raise ConvergenceError(
            f"doubling slices to {2 * settings.slices(params)} moved eigenphases by "
            f"{dev:.3e} > {settings.convergence_tol:.1e}"
        )


def _full_propagator(params, beta, terms: LatticeTerms, settings):
    hop = to_dense(terms.hop).astype(complex)
    hop_t = hop.conj().T
    potential = terms.potential(params, beta)
    interaction = params.U * terms.interaction
    idx = np.arange(hop.shape[0])

    def hamiltonian(t):
        phase = np.exp(-1j * params.omega_F * t)
        h = (0.5 * params.J) * (phase * hop + np.conj(phase) * hop_t)
        h[idx, idx] += params.V * math.cos(params.Omega * t) * potential + interaction
        return h

    return time_ordered_product(hamiltonian, params.T, settings.slices(params), settings.scheme)


def _sector_stack(params, betas, phis, sector: SectorTerms, settings):
    """Reduced propagators at paired points ``(betas[i], phis[i])``."""
    betas = np.asarray(betas, dtype=float)
    phis = np.asarray(phis, dtype=float)
    A = sector.hop(phis)
    A_dag = np.swapaxes(A, -1, -2).conj()
    potential = sector.potential(params, betas)
    interaction = params.U * sector.terms.interaction[sector.seeds.seeds]
    idx = np.arange(sector.dimension)

    def hamiltonian(t):
        phase = np.exp(-1j * params.omega_F * t)
        h = (0.5 * params.J) * (phase * A + np.conj(phase) * A_dag)
        h[..., idx, idx] += params.V * math.cos(params.Omega * t) * potential + interaction
        return h

    return time_ordered_product(hamiltonian, params.T, settings.slices(params), settings.scheme)


def propagate_period(
    beta: float,
    params: ModelParams,
    chain: Chain,
    source: Literal["full", "sector"] = "full",
    settings: PropagatorSettings | None = None,
    phi: float | None = None,
    boundary: str = "periodic",
) -> np.ndarray:
    """One-period propagator at fixed ``beta``.

    ``source="full"`` gives the ``D x D`` matrix on the Fock basis (dense; only
    for small systems); ``source="sector"`` the ``D_S x D_S`` matrix obtained by
    propagating the Bloch-sector Hamiltonian at ``phi``.
    """
    settings = settings or PropagatorSettings()
    if source == "full":

        def compute(s):
            return _full_propagator(params, beta, chain.terms(boundary), s)

    elif source == "sector":
        if boundary != "periodic":
            raise BoundaryError("sector propagation requires periodic boundaries")
        if phi is None:
            raise ValueError("sector propagation needs phi")
        _check_sector_compatible(params)

        def compute(s):
            return _sector_stack(params, [beta], [phi], chain.sector, s)[0]

    else:
        raise ValueError(f"unknown source {source!r}")
    U = compute(settings)
    _check_convergence(compute, params, settings, U)
    return U


@dataclass
class ReducedFloquet:
    """Reduced one-period operator on the seed basis at one (beta, phi)."""

    matrix: np.ndarray
    beta: float
    phi: float
    eigenphases: np.ndarray = field(init=False)
    eigenvectors: np.ndarray = field(init=False)

    def __post_init__(self):
        self.eigenphases, self.eigenvectors = floquet_eigensystem(self.matrix)


def project_full_propagator(U_full: np.ndarray, phi: float, seeds: SeedDecomposition) -> np.ndarray:
    """``<m| U sum_j e^{ij phi} T^j |n>`` for seeds m, n (shifts taken symmetric)."""
    shifts = seeds.minimal_shift(np.arange(seeds.L))
    rows = U_full[seeds.seeds]  # (DS, D)
    blocks = rows[:, seeds.orbits]  # (DS, DS, L): <m|U|T^j n>
    return blocks @ np.exp(1j * phi * shifts)


def reduced_floquet_projection(
    beta: float,
    phi: float,
    params: ModelParams,
    chain: Chain,
    settings: PropagatorSettings | None = None,
    path: Literal["sector", "projection"] = "sector",
) -> ReducedFloquet:
    """Reduced Floquet operator at ``(beta, phi)``.

    ``path="projection"`` builds the full propagator and projects it onto the
    seed states (reference); ``path="sector"`` propagates the sector
    Hamiltonian directly (fast).
    """
    settings = settings or PropagatorSettings()
    _check_sector_compatible(params)
    if path == "projection":
        chain.sector.check_momenta(phi)
        U_full = propagate_period(beta, params, chain, "full", settings)
        matrix = project_full_propagator(U_full, phi, chain.seeds)
    elif path == "sector":
        matrix = propagate_period(beta, params, chain, "sector", settings, phi=phi)
    else:
        raise ValueError(f"unknown path {path!r}")
    return ReducedFloquet(matrix, float(beta), float(phi))


def _grid_chunk(args):
    params, chain, betas, phis, settings = args
    return _sector_stack(params, betas, phis, chain.sector, settings)


def reduced_floquet_grid(
    params: ModelParams,
    betas,
    phis,
    chain: Chain,
    settings: PropagatorSettings | None = None,
) -> np.ndarray:
    """Reduced operators on the product grid, shape ``(n_beta, n_phi, D_S, D_S)``.

    Points are processed in independent chunks; with ``settings.threads > 1``
    the chunks go to a process pool and are reassembled by grid index.
    """
    settings = settings or PropagatorSettings()
    _check_sector_compatible(params)
    betas = np.asarray(betas, dtype=float)
    phis = np.asarray(phis, dtype=float)
    B, P = np.meshgrid(betas, phis, indexing="ij")
    B, P = B.ravel(), P.ravel()
    DS = chain.n_bands
    per_point = 16 * DS * DS * 8
    chunk = max(1, min(len(B), _CHUNK_BYTES // per_point))
    threads = settings.threads or os.cpu_count() or 1
    if threads > 1:
        chunk = max(1, min(chunk, math.ceil(len(B) / threads)))
    jobs = [(params, chain, B[i : i + chunk], P[i : i + chunk], settings) for i in range(0, len(B), chunk)]
    if threads > 1 and len(jobs) > 1:
        chain.sector  # build once before pickling
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_grid_chunk, jobs))
    else:
        parts = [_grid_chunk(job) for job in jobs]
    return np.concatenate(parts).reshape(len(betas), len(phis), DS, DS)


def uniform_grid(n: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n) / n


def branch_cut(phases: np.ndarray) -> tuple[float, float]:
    """Midpoint and width of the widest empty arc left by all ``phases``."""
    flat = np.sort(np.mod(np.ravel(phases), 2 * np.pi))
    gaps = np.diff(np.concatenate([flat, [flat[0] + 2 * np.pi]]))
    k = int(np.argmax(gaps))
    return float(np.angle(np.exp(1j * (flat[k] + 0.5 * gaps[k])))), float(gaps[k])


def unwrap_from_cut(phases: np.ndarray, cut: float) -> np.ndarray:
    """Phases measured upward from the cut, in ``[0, 2 pi)``."""
    return np.mod(np.asarray(phases) - cut, 2 * np.pi)


@dataclass
class EigenGrid:
    """Eigen-systems on a (beta, phi) grid, bands sorted upward from a fixed cut."""

    betas: np.ndarray
    phis: np.ndarray
    phases: np.ndarray  # (nb, np, DS) raw eigenphases in (-pi, pi]
    vectors: np.ndarray  # (nb, np, DS, DS), columns match ``phases``
    cut: float
    cut_width: float

    @property
    def n_bands(self) -> int:
        return self.phases.shape[-1]

    @property
    def levels(self) -> np.ndarray:
        """Phases measured from the cut (monotone in band index)."""
        return unwrap_from_cut(self.phases, self.cut)


def eigen_grid(
    params: ModelParams,
    betas,
    phis,
    chain: Chain,
    settings: PropagatorSettings | None = None,
    cut: float | None = None,
) -> EigenGrid:
    """Diagonalise the reduced operator on a grid and sort bands from a cut.

    Without an explicit ``cut`` it is placed in the middle of the widest arc
    that no eigenphase on the grid enters, so no band crosses it.
    """
    U = reduced_floquet_grid(params, betas, phis, chain, settings)
    phases, vectors = floquet_eigensystem(U)
    if cut is None:
        cut, width = branch_cut(phases)
    else:
        width = float("nan")
    order = np.argsort(unwrap_from_cut(phases, cut), axis=-1)
    phases = np.take_along_axis(phases, order, axis=-1)
    vectors = np.take_along_axis(vectors, order[..., None, :], axis=-1)
    return EigenGrid(np.asarray(betas, float), np.asarray(phis, float), phases, vectors, cut, width)


@dataclass
class BandStructure:
    """Quasienergy sheets on a (beta, phi) grid.

    ``sheets[i, j, n]`` is the quasienergy of continued band ``n`` at
    ``(betas[i], phis[j])``.  Labels start from cut-sorted order at ``phi = 0``
    and follow maximal eigenvector overlap along ``phi``.
    """

    betas: np.ndarray
    phis: np.ndarray
    sheets: np.ndarray
    cut: float
    ambiguous: list = field(default_factory=list)
    sign_convention: str = "U|psi> = exp(+i eps)|psi>, eps in (-pi, pi]"

    @property
    def n_bands(self) -> int:
        return self.sheets.shape[-1]

    def phi_dispersion(self) -> np.ndarray:
        """Per band: largest spread along phi at fixed beta (circular)."""
        return _circular_spread(self.sheets, self.cut, axis=1).max(axis=0)

    def beta_dispersion(self) -> np.ndarray:
        """Per band: largest spread along beta at fixed phi (circular)."""
        return _circular_spread(self.sheets, self.cut, axis=0).max(axis=0)


def _circular_spread(sheets, cut, axis):
    levels = unwrap_from_cut(sheets, cut)
    return levels.max(axis=axis) - levels.min(axis=axis)


def continue_bands(grid: EigenGrid) -> tuple[np.ndarray, list]:
    """Relabel bands along phi by maximal overlap with the previous phi point.

    Returns the permuted phases and a list of ``(i_beta, j_phi, overlap)``
    where the matched overlap fell below 0.5.
    """
    nb, nphi, DS = grid.phases.shape
    sheets = np.empty_like(grid.phases)
    ambiguous = []
    for i in range(nb):
        prev = grid.vectors[i, 0]
        sheets[i, 0] = grid.phases[i, 0]
        for j in range(1, nphi):
            vecs = grid.vectors[i, j]
            weight = np.abs(prev.conj().T @ vecs) ** 2
            rows, cols = linear_sum_assignment(-weight)
            perm = cols[np.argsort(rows)]
            sheets[i, j] = grid.phases[i, j, perm]
            prev = vecs[:, perm]
            worst = float(np.sqrt(weight[rows, cols].min()))
            if worst < 0.5:
                ambiguous.append((i, j, worst))
    if ambiguous:
        warnings.warn(
            f"band continuation ambiguous at {len(ambiguous)} grid points",
            ContinuationAmbiguity,
            stacklevel=2,
        )
    return sheets, ambiguous


def quasienergy_bands(
    params: ModelParams,
    grid: tuple[int, int] = (61, 61),
    chain: Chain | None = None,
    settings: PropagatorSettings | None = None,
) -> BandStructure:
    n_beta, n_phi = grid
    if n_beta < 4 or n_phi < 4:
        raise ValueError("band grids need at least 4 points per direction")
    chain = chain or Chain(L=3, N=1)
    eg = eigen_grid(params, uniform_grid(n_beta), uniform_grid(n_phi), chain, settings)
    sheets, ambiguous = continue_bands(eg)
    return BandStructure(eg.betas, eg.phis, sheets, eg.cut, ambiguous)


def obc_spectrum(
    params: ModelParams,
    beta_grid,
    L_open: int,
    settings: PropagatorSettings | None = None,
    N: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenphases and eigenvectors of the open-chain period propagator.

    Returns ``(phases, vectors)`` with shapes ``(n_beta, D)`` and
    ``(n_beta, D, D)``; phases are sorted ascending in (-pi, pi].
    """
    settings = settings or PropagatorSettings()
    chain = Chain(L=L_open, N=N)
    terms = chain.open
    betas = np.asarray(beta_grid, dtype=float)
    hop = to_dense(terms.hop).astype(complex)
    hop_t = hop.conj().T
    potential = np.stack([terms.potential(params, b) for b in betas])
    interaction = params.U * terms.interaction
    idx = np.arange(hop.shape[0])

    def hamiltonian(t):
        phase = np.exp(-1j * params.omega_F * t)
        h = np.broadcast_to((0.5 * params.J) * (phase * hop + np.conj(phase) * hop_t), (len(betas),) + hop.shape).copy()
        h[:, idx, idx] += params.V * math.cos(params.Omega * t) * potential + interaction
        return h

    U = time_ordered_product(hamiltonian, params.T, settings.slices(params), settings.scheme)
    phases, vectors = floquet_eigensystem(U)
    order = np.argsort(phases, axis=-1)
    return (
        np.take_along_axis(phases, order, axis=-1),
        np.take_along_axis(vectors, order[..., None, :], axis=-1),
    )


def obc_quasienergies(
    params: ModelParams,
    beta_grid,
    L_open: int,
    settings: PropagatorSettings | None = None,
) -> dict[float, np.ndarray]:
    """Sorted open-chain eigenphases keyed by beta (one particle)."""
    phases, _ = obc_spectrum(params, beta_grid, L_open, settings)
    return {float(b): ph for b, ph in zip(beta_grid, phases)}


def edge_spectral_flow(
    params: ModelParams,
    gap_phase: float,
    L_open: int = 16,
    n_beta: int = 96,
    edge_cells: int = 3,
    settings: PropagatorSettings | None = None,
) -> dict[str, int]:
    """Signed count of edge modes crossing ``gap_phase`` over one beta cycle.

    States are followed between neighbouring beta points by overlap; a
    crossing counts +1 upward and -1 downward, attributed to the edge that
    holds most of the crossing state's weight.
    """
    betas = uniform_grid(n_beta)
    phases, vectors = obc_spectrum(params, np.append(betas, 2 * np.pi), L_open, settings)
    D = phases.shape[-1]
    cell_weight = np.abs(vectors) ** 2
    left = cell_weight[:, : 3 * edge_cells].sum(axis=1)
    right = cell_weight[:, D - 3 * edge_cells :].sum(axis=1)
    flow = {"left": 0, "right": 0}
    rel = np.angle(np.exp(1j * (phases - gap_phase)))
    for k in range(n_beta):
        weight = np.abs(vectors[k].conj().T @ vectors[k + 1]) ** 2
        rows, cols = linear_sum_assignment(-weight)
        before, after = rel[k, rows], rel[k + 1, cols]
        # a jump of nearly 2 pi is a wrap through the opposite side, not a crossing
        up = (before < 0) & (after >= 0) & (after - before < np.pi)
        down = (before >= 0) & (after < 0) & (before - after < np.pi)
        for r, c, sign in [(r, c, 1) for r, c in zip(rows[up], cols[up])] + [
            (r, c, -1) for r, c in zip(rows[down], cols[down])
        ]:
            wl = 0.5 * (left[k, r] + left[k + 1, c])
            wr = 0.5 * (right[k, r] + right[k + 1, c])
            if max(wl, wr) > 0.5:
                flow["left" if wl > wr else "right"] += sign
    return flow
