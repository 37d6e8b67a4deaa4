"""Driven Aubry-Andre-Harper chain with a linear tilt.

Lab frame::

    H = sum_j (J/2)(a+_j a_{j+1} + h.c.) + V cos(lam j - beta) cos(Omega t) n_j
        + (U/2) sum_j n_j (n_j - 1) + omega_F sum_j j n_j

Rotating frame (tilt removed, hopping picks up ``exp(-i omega_F t)``)::

    H_r = sum_j (J/2)(e^{-i omega_F t} a+_j a_{j+1} + h.c.)
          + sum_j [V cos(lam j - beta) cos(Omega t) n_j + (U/2) n_j (n_j - 1)]

Sites are labelled ``j = 1 .. 3L``.  Operators are returned as
``scipy.sparse.csr_matrix`` (canonical, sorted indices).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Literal

import numpy as np
import scipy.sparse as sp

from .errors import BoundaryError, ConfigError
from .fock import CELL, FockBasis, SeedDecomposition

Boundary = Literal["periodic", "open"]

DENSE_THRESHOLD = 4096


def parse_fraction(value) -> Fraction:
    """Parse ``"a/b"`` strings, ints and Fractions into a reduced Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ConfigError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"not a rational: {value!r}") from exc
    raise ConfigError(
        f"rationals must be given as 'a/b' strings or integers, got {value!r}"
    )


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the model.

    ``ratio`` is omega_F / Omega = a/b (equivalently T1/T2); ``ratio = 0``
    switches the tilt off.  ``lam`` is p/q with lambda = 2 pi p / q.
    """

    J: float = 2.5
    V: float = 2.5
    T1: float = 2.0
    ratio: Fraction = Fraction(0)
    U: float = 0.0
    lam: Fraction = Fraction(1, 3)
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "ratio", parse_fraction(self.ratio))
        object.__setattr__(self, "lam", parse_fraction(self.lam))
        if self.ratio < 0:
            raise ConfigError(f"ratio a/b must be non-negative, got {self.ratio}")
        if self.lam <= 0:
            raise ConfigError(f"p/q must be positive, got {self.lam}")
        if not self.T1 > 0:
            raise ConfigError(f"T1 must be positive, got {self.T1}")
        if self.q != 3:
            warnings.warn(
                f"p/q = {self.lam} has q != 3; results are not checked against the "
                "three-sublattice model",
                stacklevel=3,
            )

    @property
    def a(self) -> int:
        return self.ratio.numerator

    @property
    def b(self) -> int:
        return self.ratio.denominator

    @property
    def p(self) -> int:
        return self.lam.numerator

    @property
    def q(self) -> int:
        return self.lam.denominator

    @property
    def Omega(self) -> float:
        return 2 * math.pi / self.T1

    @property
    def omega_F(self) -> float:
        return float(self.ratio) * self.Omega

    @property
    def T2(self) -> float:
        """Bloch period; ``inf`` without tilt."""
        return math.inf if self.a == 0 else 2 * math.pi / self.omega_F

    @property
    def T(self) -> float:
        """Common period ``a T2 = b T1`` (``T1`` when the tilt is off)."""
        return self.b * self.T1

    @property
    def lam_angle(self) -> float:
        return 2 * math.pi * float(self.lam)

    def site_angle(self, sites) -> np.ndarray:
        """``lam * j`` reduced mod ``2 pi``, so sites ``q`` apart get bit-identical values."""
        sites = np.asarray(sites)
        return (2 * math.pi / self.q) * np.mod(self.p * sites, self.q)

    def with_beta(self, beta: float) -> "ModelParams":
        return replace(self, beta=float(beta))

    def clock(self) -> dict:
        return {
            "T1": self.T1,
            "T2": self.T2 if self.a else None,
            "T": self.T,
            "Omega": self.Omega,
            "omega_F": self.omega_F,
            "a": self.a,
            "b": self.b,
        }


@dataclass(eq=False)
class LatticeTerms:
    """Time-independent building blocks of the Hamiltonian on one basis.

    ``hop`` is ``sum_j a+_j a_{j+1}`` (the wrap-around link included for
    periodic boundaries); all other terms are diagonal in the Fock basis.
    """

    basis: FockBasis
    boundary: Boundary = "periodic"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def sites(self) -> np.ndarray:
        return np.arange(1, self.basis.n_sites + 1)

    @cached_property
    def hop(self) -> sp.csr_matrix:
        states = self.basis.states.astype(np.int64)
        n_sites = self.basis.n_sites
        rows, cols, vals = [], [], []
        links = n_sites if (self.boundary == "periodic" and n_sites > 1) else n_sites - 1
        for j in range(links):
            src = (j + 1) % n_sites  # a_{j+1}: particle leaves site j+1 ...
            dst = j  # ... and lands on site j
            movable = np.nonzero(states[:, src] > 0)[0]
            if movable.size == 0:
                continue
            new = states[movable].copy()
            amp = np.sqrt(new[:, src] * (new[:, dst] + 1).astype(float))
            new[:, src] -= 1
            new[:, dst] += 1
            rows.append(self.basis.indices_of(new))
            cols.append(movable)
            vals.append(amp)
        D = self.basis.dimension
        if not rows:
            return sp.csr_matrix((D, D), dtype=float)
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(D, D)
        ).tocsr()
        mat.sum_duplicates()
        mat.sort_indices()
        return mat

    @cached_property
    def interaction(self) -> np.ndarray:
        n = self.basis.states.astype(float)
        return 0.5 * np.sum(n * (n - 1), axis=1)

    @cached_property
    def position(self) -> np.ndarray:
        """Diagonal of ``sum_j j n_j``."""
        return self.basis.states.astype(float) @ self.sites

    def potential(self, params: ModelParams, beta: float | None = None) -> np.ndarray:
        """Diagonal of ``sum_j cos(lam j - beta) n_j``."""
        beta = params.beta if beta is None else beta
        key = ("pot", float(params.lam), float(beta))
        if key not in self._cache:
            if len(self._cache) > 64:
                self._cache.clear()
            profile = np.cos(params.site_angle(self.sites) - beta)
            self._cache[key] = self.basis.states.astype(float) @ profile
        return self._cache[key]

    def diagonal(self, t: float, params: ModelParams, beta: float | None = None) -> np.ndarray:
        return (
            params.V * math.cos(params.Omega * t) * self.potential(params, beta)
            + params.U * self.interaction
        )


def _assemble(terms: LatticeTerms, hop_phase: complex, J: float, diag: np.ndarray):
    hop = terms.hop
    kinetic = (0.5 * J) * (hop_phase * hop + np.conj(hop_phase) * hop.T)
    return (kinetic + sp.diags(diag)).tocsr()


def _terms(basis, boundary, terms):
    if terms is not None:
        if terms.basis is not basis or terms.boundary != boundary:
            raise ValueError("terms were built for a different basis or boundary")
        return terms
    return LatticeTerms(basis, boundary)


def lab_hamiltonian(
    t: float,
    params: ModelParams,
    basis: FockBasis,
    boundary: Boundary = "periodic",
    terms: LatticeTerms | None = None,
) -> sp.csr_matrix:
    terms = _terms(basis, boundary, terms)
    diag = terms.diagonal(t, params) + params.omega_F * terms.position
    return _assemble(terms, 1.0, params.J, diag)


def rotated_hamiltonian(
    t: float,
    params: ModelParams,
    basis: FockBasis,
    boundary: Boundary = "periodic",
    terms: LatticeTerms | None = None,
) -> sp.csr_matrix:
    terms = _terms(basis, boundary, terms)
    return _assemble(terms, np.exp(-1j * params.omega_F * t), params.J, terms.diagonal(t, params))


class SectorTerms:
    """Hamiltonian building blocks projected onto the Bloch sectors.

    The forward-hop operator projects to ``A(phi) = sum_d exp(-i d phi) A_d``
    where ``d`` is the co-translation shift (mapped into ``(-L/2, L/2]``)
    between the hopped state and its orbit representative.  On the momentum
    grid ``2 pi s / L`` this is exactly ``<phi, m| A |phi, n>``; for one
    particle (and ``L >= 3``) it is the Bloch Hamiltonian at any ``phi``.
    With two or more particles the interpolation between grid momenta also
    twists the relative coordinate and produces spurious states, so only
    grid momenta are accepted there.
    """

    def __init__(self, seeds: SeedDecomposition, terms: LatticeTerms | None = None):
        basis = seeds.basis
        if terms is None:
            terms = LatticeTerms(basis, "periodic")
        if terms.boundary != "periodic":
            raise BoundaryError("Bloch sectors exist only for periodic boundaries")
        self.seeds = seeds
        self.terms = terms
        DS = seeds.cardinality
        self.dimension = DS
        cols = terms.hop.tocsc()[:, seeds.seeds].tocoo()
        target = cols.row
        m = seeds.orbit_seed[target]
        d = seeds.minimal_shift(seeds.orbit_shift[target])
        self.shifts = np.unique(d)
        self.hop_blocks = np.zeros((len(self.shifts), DS, DS))
        np.add.at(self.hop_blocks, (np.searchsorted(self.shifts, d), m, cols.col), cols.data)
        self.continuous = basis.N == 1 and basis.L >= 3

    def check_momenta(self, phi):
        if self.continuous:
            return
        s = np.asarray(phi, dtype=float) * self.seeds.L / (2 * np.pi)
        if np.any(np.abs(s - np.round(s)) > 1e-9):
            raise ConfigError(
                f"phi must lie on the momentum grid 2 pi s / {self.seeds.L} for "
                f"N={self.seeds.basis.N}, L={self.seeds.L}"
            )

    def hop(self, phi) -> np.ndarray:
        """``A(phi)``; ``phi`` may be an array, giving a stack of matrices."""
        phi = np.asarray(phi, dtype=float)
        self.check_momenta(phi)
        phases = np.exp(-1j * np.multiply.outer(phi, self.shifts))
        return np.tensordot(phases, self.hop_blocks, axes=([-1], [0]))

    def diagonal(self, t: float, params: ModelParams, beta=None) -> np.ndarray:
        return self.terms.diagonal(t, params, beta)[self.seeds.seeds]

    def potential(self, params: ModelParams, beta) -> np.ndarray:
        """Seed-restricted site potential; ``beta`` may be an array."""
        beta = np.asarray(beta, dtype=float)
        profile = np.cos(params.site_angle(self.terms.sites) - beta[..., None])
        occ = self.seeds.basis.states[self.seeds.seeds].astype(float)
        return profile @ occ.T

    def hamiltonian(self, t, phi, params: ModelParams, beta=None) -> np.ndarray:
        beta = params.beta if beta is None else beta
        A = self.hop(phi)
        phase = np.exp(-1j * params.omega_F * t)
        kinetic = 0.5 * params.J * (phase * A + np.conj(phase) * np.swapaxes(A, -1, -2).conj())
        diag = params.V * math.cos(params.Omega * t) * self.potential(params, beta)
        diag = diag + params.U * self.terms.interaction[self.seeds.seeds]
        idx = np.arange(self.dimension)
        out = kinetic.copy()
        out[..., idx, idx] += diag
        return out


def _check_sector_compatible(params: ModelParams):
    if CELL % params.q:
        raise ConfigError(
            f"the superlattice period q={params.q} must divide the {CELL}-site cell "
            "for co-translation symmetry"
        )


def sector_hamiltonian(
    t: float,
    phi: float,
    params: ModelParams,
    basis: FockBasis,
    seeds: SeedDecomposition,
    boundary: Boundary = "periodic",
    sector_terms: SectorTerms | None = None,
) -> np.ndarray:
    """Dense ``D_S x D_S`` matrix of ``H_r(t)`` in the Bloch sector ``phi``."""
    if boundary != "periodic":
        raise BoundaryError("sector_hamiltonian requires periodic boundaries")
    if seeds.basis is not basis:
        raise ValueError("seed decomposition belongs to a different basis")
    _check_sector_compatible(params)
    if sector_terms is None:
        sector_terms = SectorTerms(seeds)
    return sector_terms.hamiltonian(t, phi, params)


def translation_matrix(seeds: SeedDecomposition) -> sp.csr_matrix:
    """Permutation matrix of one co-translation on the Fock basis."""
    D = seeds.basis.dimension
    return sp.csr_matrix((np.ones(D), (seeds.translation, np.arange(D))), shape=(D, D))


def to_dense(op, threshold: int = DENSE_THRESHOLD) -> np.ndarray:
    if op.shape[0] > threshold:
        raise MemoryError(f"refusing dense conversion of a {op.shape[0]}-dimensional operator")
    return op.toarray() if sp.issparse(op) else np.asarray(op)


@dataclass(eq=False)
class Chain:
    """Basis, orbit structure and cached operator terms for one (L, N)."""

    L: int
    N: int = 1
    cap: int | None = None

    @cached_property
    def basis(self) -> FockBasis:
        from .fock import DEFAULT_DIMENSION_CAP, enumerate_basis

        return enumerate_basis(self.L, self.N, cap=self.cap or DEFAULT_DIMENSION_CAP)

    @cached_property
    def seeds(self) -> SeedDecomposition:
        from .fock import seed_decompose

        return seed_decompose(self.basis)

    @cached_property
    def periodic(self) -> LatticeTerms:
        return LatticeTerms(self.basis, "periodic")

    @cached_property
    def open(self) -> LatticeTerms:
        return LatticeTerms(self.basis, "open")

    @cached_property
    def sector(self) -> SectorTerms:
        return SectorTerms(self.seeds, self.periodic)

    def terms(self, boundary: Boundary) -> LatticeTerms:
        return self.periodic if boundary == "periodic" else self.open

    @property
    def n_bands(self) -> int:
        return self.seeds.cardinality
