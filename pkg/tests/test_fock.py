import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floqbloch.errors import CoprimalityViolation, NotASeed, OverflowRisk
from floqbloch.fock import (
    bloch_vector,
    cotranslate,
    enumerate_basis,
    fock_dimension,
    lift_sector_vectors,
    seed_decompose,
)


@pytest.mark.parametrize("L,N,D", [(5, 1, 15), (5, 2, 120), (21, 2, 2016), (2, 1, 6), (1, 1, 3)])
def test_dimension_matches_binomial(L, N, D):
    basis = enumerate_basis(L, N)
    assert basis.dimension == D == fock_dimension(L, N)
    assert np.all(basis.states.sum(axis=1) == N)
    assert basis.states.shape == (D, 3 * L)


@pytest.mark.parametrize("L,N,DS", [(5, 2, 24), (21, 2, 96), (7, 1, 3), (4, 3, 91)])
def test_seed_cardinality(L, N, DS):
    seeds = seed_decompose(enumerate_basis(L, N))
    assert seeds.cardinality == DS
    assert seeds.orbits.shape == (DS, L)


def test_ordering_is_reproducible_and_lexicographic():
    a = enumerate_basis(3, 2)
    b = enumerate_basis(3, 2)
    assert np.array_equal(a.states, b.states)
    # descending lexicographic order of occupation vectors
    rows = [tuple(r) for r in a.states]
    assert rows == sorted(rows, reverse=True)


def test_index_of_is_a_bijection():
    basis = enumerate_basis(3, 2)
    idx = [basis.index_of(s) for s in basis.states]
    assert idx == list(range(basis.dimension))
    assert np.array_equal(basis.indices_of(basis.states), np.arange(basis.dimension))
    with pytest.raises(KeyError):
        basis.index_of(np.zeros(9, dtype=int))


def test_coprimality_and_cap():
    with pytest.raises(CoprimalityViolation):
        enumerate_basis(4, 2)
    with pytest.raises(OverflowRisk):
        enumerate_basis(21, 2, cap=1000)


def test_cotranslate_examples():
    assert cotranslate([1, 0, 0, 0, 0, 0]).tolist() == [0, 0, 0, 1, 0, 0]
    assert cotranslate([1, 1, 0, 0, 0, 0]).tolist() == [0, 0, 0, 1, 1, 0]
    # |n_1..n_3L> -> |n_{3L-2}, n_{3L-1}, n_{3L}, n_1, ...>
    s = np.arange(1, 10)
    assert cotranslate(s).tolist() == [7, 8, 9, 1, 2, 3, 4, 5, 6]


@settings(max_examples=50, deadline=None)
@given(L=st.integers(1, 6), data=st.data())
def test_cotranslate_L_times_is_identity(L, data):
    occ = np.array(data.draw(st.lists(st.integers(0, 3), min_size=3 * L, max_size=3 * L)))
    out = occ
    for _ in range(L):
        out = cotranslate(out)
    assert np.array_equal(out, occ)
    assert cotranslate(occ).sum() == occ.sum()


def test_single_particle_cotranslation_is_three_site_shift():
    basis = enumerate_basis(5, 1)
    for s in basis.states:
        x = int(np.argmax(s))
        assert int(np.argmax(cotranslate(s))) == (x + 3) % 15


@pytest.mark.parametrize("L,N", [(5, 1), (5, 2), (3, 2), (7, 2), (4, 3)])
def test_orbits_partition_the_basis(L, N):
    basis = enumerate_basis(L, N)
    seeds = seed_decompose(basis)
    flat = np.sort(seeds.orbits.ravel())
    assert np.array_equal(flat, np.arange(basis.dimension))
    assert basis.dimension == seeds.cardinality * L
    for m, orbit in enumerate(seeds.orbits):
        state = basis.states[seeds.seeds[m]]
        for j, idx in enumerate(orbit):
            assert np.array_equal(basis.states[idx], state)
            assert seeds.orbit_of(idx) == (m, j)
            state = cotranslate(state)


def test_no_two_seeds_related_by_translation_bruteforce():
    basis = enumerate_basis(5, 2)
    seeds = seed_decompose(basis)
    seen = set()
    for s in seeds.seeds:
        images = set()
        state = basis.states[s]
        for _ in range(5):
            images.add(state.tobytes())
            state = cotranslate(state)
        assert not (images & seen)
        seen |= images
    assert len(seen) == basis.dimension


def test_single_particle_seeds_are_first_cell():
    seeds = seed_decompose(enumerate_basis(6, 1))
    occupied = [int(np.argmax(seeds.basis.states[s])) for s in seeds.seeds]
    assert sorted(occupied) == [0, 1, 2]


def test_seed_is_first_member_in_basis_order():
    seeds = seed_decompose(enumerate_basis(5, 2))
    assert np.all(seeds.orbits.min(axis=1) == seeds.seeds)


def test_bloch_vector_examples():
    seeds = seed_decompose(enumerate_basis(5, 2))
    v0 = bloch_vector(seeds.seeds[3], 0.0, seeds)
    nz = np.nonzero(v0)[0]
    assert len(nz) == 5
    assert np.allclose(v0[nz], 1 / np.sqrt(5))
    v = bloch_vector(seeds.basis.states[seeds.seeds[3]], 1.234, seeds)
    assert np.isclose(np.linalg.norm(v), 1.0)
    assert np.allclose(np.abs(v[np.nonzero(v)]), 1 / np.sqrt(5))
    with pytest.raises(NotASeed):
        bloch_vector(seeds.orbits[3, 2], 0.0, seeds)


@pytest.mark.parametrize("L,N", [(2, 1), (3, 1), (5, 1), (3, 2), (5, 2)])
def test_bloch_vectors_form_orthonormal_basis(L, N):
    seeds = seed_decompose(enumerate_basis(L, N))
    phis = 2 * np.pi * np.arange(L) / L
    B = np.stack([bloch_vector(s, p, seeds) for p in phis for s in seeds.seeds], axis=1)
    assert B.shape == (seeds.basis.dimension,) * 2
    assert np.allclose(B.conj().T @ B, np.eye(B.shape[1]), atol=1e-12)


def test_lift_sector_vectors_matches_bloch_sum():
    seeds = seed_decompose(enumerate_basis(5, 2))
    rng = np.random.default_rng(0)
    c = rng.normal(size=24) + 1j * rng.normal(size=24)
    phi = 2 * np.pi * 3 / 5
    lifted = lift_sector_vectors(c, phi, seeds)
    ref = sum(c[m] * bloch_vector(s, phi, seeds) for m, s in enumerate(seeds.seeds)) * np.sqrt(5)
    assert np.allclose(lifted, ref)
    two = lift_sector_vectors(np.stack([c, 2 * c], axis=1), phi, seeds)
    assert np.allclose(two[:, 1], 2 * lifted)


def test_three_boson_basis_constructs():
    basis = enumerate_basis(2, 3)
    assert basis.dimension == math.comb(6 + 2, 3)
    assert basis.states.max() == 3
    assert set(map(tuple, basis.states)) == {
        tuple(np.bincount(c, minlength=6)) for c in itertools.combinations_with_replacement(range(6), 3)
    }
