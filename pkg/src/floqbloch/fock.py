"""Fixed-particle-number occupation basis on a chain of 3L sites.

States are ordered by the sorted tuple of particle positions, which is the
same as descending lexicographic order of the occupation vectors.  With this
ordering the first member of every co-translation orbit puts its leftmost
particle as far left as possible; for one particle the orbit representatives
are the three sites of the first unit cell.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CoprimalityViolation,
    NotASeed,
    OrbitSizeError,
    OverflowRisk,
)

CELL = 3  # sites per unit cell
DEFAULT_DIMENSION_CAP = 500_000
OCC_DTYPE = np.int16


def fock_dimension(L: int, N: int) -> int:
    return math.comb(CELL * L + N - 1, N)


@dataclass(frozen=True, eq=False)
class FockBasis:
    """All N-boson occupation vectors on ``3L`` sites.

    Attributes
    ----------
    L, N : int
        Number of unit cells and bosons.
    states : ndarray, shape (D, 3L)
        Occupation vectors, one row per basis state.
    """

    L: int
    N: int
    states: np.ndarray
    _index: dict = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.states.shape[0]

    @property
    def n_sites(self) -> int:
        return self.states.shape[1]

    def index_of(self, occupations) -> int:
        occ = np.asarray(occupations, dtype=OCC_DTYPE)
        try:
            return self._index[occ.tobytes()]
        except KeyError:
            raise KeyError(f"{occ.tolist()} is not in the basis") from None

    def indices_of(self, occupations: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`index_of` over the rows of ``occupations``."""
        occ = np.ascontiguousarray(occupations, dtype=OCC_DTYPE)
        index = self._index
        return np.fromiter((index[row.tobytes()] for row in occ), dtype=np.int64, count=len(occ))

    def __len__(self) -> int:
        return self.dimension


def enumerate_basis(L: int, N: int, cap: int = DEFAULT_DIMENSION_CAP) -> FockBasis:
    """Enumerate the occupation basis for N bosons on L three-site cells."""
    if L < 1 or N < 1:
        raise ValueError(f"need L >= 1 and N >= 1, got L={L}, N={N}")
    if N > 1 and math.gcd(L, N) != 1:
        raise CoprimalityViolation(
            f"gcd(L={L}, N={N}) = {math.gcd(L, N)}; orbits of the co-translation "
            "would not all have length L"
        )
    D = fock_dimension(L, N)
    if D > cap:
        raise OverflowRisk(f"basis dimension {D} exceeds cap {cap}")
    n_sites = CELL * L
    positions = np.array(
        list(itertools.combinations_with_replacement(range(n_sites), N)), dtype=np.int64
    ).reshape(D, N)
    states = np.zeros((D, n_sites), dtype=OCC_DTYPE)
    rows = np.repeat(np.arange(D), N)
    np.add.at(states, (rows, positions.ravel()), 1)
    states.setflags(write=False)
    index = {row.tobytes(): i for i, row in enumerate(states)}
    return FockBasis(L=L, N=N, states=states, _index=index)


def cotranslate(state) -> np.ndarray:
    """Shift every occupation three sites to the right (cyclically).

    ``|n_1, ..., n_3L>`` maps to ``|n_{3L-2}, n_{3L-1}, n_{3L}, n_1, ..., n_{3L-3}>``.
    """
    state = np.asarray(state)
    return np.roll(state, CELL, axis=-1)


@dataclass(frozen=True, eq=False)
class SeedDecomposition:
    """Co-translation orbits of a basis.

    Attributes
    ----------
    seeds : ndarray, shape (D_S,)
        Basis index of each orbit representative.
    orbits : ndarray, shape (D_S, L)
        ``orbits[m, j]`` is the basis index of ``T^j |seed_m>``.
    orbit_seed, orbit_shift : ndarray, shape (D,)
        For every basis index, the orbit it belongs to and its shift ``j``.
    translation : ndarray, shape (D,)
        Basis permutation induced by one co-translation.
    """

    basis: FockBasis
    seeds: np.ndarray
    orbits: np.ndarray
    orbit_seed: np.ndarray
    orbit_shift: np.ndarray
    translation: np.ndarray

    @property
    def cardinality(self) -> int:
        return len(self.seeds)

    @property
    def L(self) -> int:
        return self.basis.L

    def orbit_of(self, index: int) -> tuple[int, int]:
        return int(self.orbit_seed[index]), int(self.orbit_shift[index])

    def seed_number(self, seed) -> int:
        """Position of a seed state (occupations or basis index) in ``seeds``."""
        if np.ndim(seed) == 0:
            idx = int(seed)
        else:
            idx = self.basis.index_of(seed)
        m, j = self.orbit_of(idx)
        if j != 0:
            raise NotASeed(f"basis state {idx} is not an orbit representative")
        return m

    def minimal_shift(self, shift):
        """Map shifts in ``0..L-1`` onto the symmetric window ``(-L/2, L/2]``."""
        shift = np.asarray(shift)
        L = self.L
        return np.where(shift > L // 2, shift - L, shift)


def seed_decompose(basis: FockBasis) -> SeedDecomposition:
    L = basis.L
    D = basis.dimension
    translation = basis.indices_of(cotranslate(basis.states))
    orbit_seed = np.full(D, -1, dtype=np.int64)
    orbit_shift = np.full(D, -1, dtype=np.int64)
    seeds, orbits = [], []
    for start in range(D):
        if orbit_seed[start] >= 0:
            continue
        m = len(seeds)
        members = [start]
        nxt = translation[start]
        while nxt != start:
            members.append(nxt)
            if len(members) > L:
                break
            nxt = translation[nxt]
        if len(members) != L:
            raise OrbitSizeError(
                f"orbit of basis state {start} has size {len(members)}, expected {L}"
            )
        members = np.array(members)
        orbit_seed[members] = m
        orbit_shift[members] = np.arange(L)
        seeds.append(start)
        orbits.append(members)
    if D % L:
        raise OrbitSizeError(f"D={D} is not divisible by L={L}")
    for arr in (orbit_seed, orbit_shift, translation):
        arr.setflags(write=False)
    return SeedDecomposition(
        basis=basis,
        seeds=np.array(seeds),
        orbits=np.array(orbits).reshape(len(seeds), L),
        orbit_seed=orbit_seed,
        orbit_shift=orbit_shift,
        translation=translation,
    )


def bloch_vector(seed, phi: float, seeds: SeedDecomposition) -> np.ndarray:
    """Normalised Bloch combination ``L^{-1/2} sum_j e^{ij phi} T^j |seed>``."""
    m = seeds.seed_number(seed)
    L = seeds.L
    vec = np.zeros(seeds.basis.dimension, dtype=complex)
    vec[seeds.orbits[m]] = np.exp(1j * phi * np.arange(L)) / np.sqrt(L)
    return vec


def lift_sector_vectors(coeffs: np.ndarray, phi: float, seeds: SeedDecomposition) -> np.ndarray:
    """Full-space state ``sum_n sum_j c_n e^{ij phi} T^j |n>`` from seed coefficients.

    ``coeffs`` may carry extra trailing columns; each is lifted independently.
    """
    coeffs = np.asarray(coeffs)
    L = seeds.L
    phases = np.exp(1j * phi * np.arange(L))
    out = np.zeros((seeds.basis.dimension,) + coeffs.shape[1:], dtype=complex)
    phases = phases.reshape((1, L) + (1,) * (coeffs.ndim - 1))
    out[seeds.orbits] = phases * coeffs[:, None, ...]
    return out
