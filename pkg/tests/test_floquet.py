import warnings

import numpy as np
import pytest

from floqbloch.errors import BoundaryError, ContinuationAmbiguity
from floqbloch.floquet import (
    PropagatorSettings,
    branch_cut,
    default_slices,
    edge_spectral_flow,
    eigen_grid,
    eigenphases,
    obc_quasienergies,
    obc_spectrum,
    phase_set_distance,
    propagate_period,
    quasienergy_bands,
    reduced_floquet_grid,
    reduced_floquet_projection,
    uniform_grid,
)
from floqbloch.hamiltonian import Chain, ModelParams

FIG1 = ModelParams(T1=2, ratio="3/1")


def unitarity_error(U):
    U = np.asarray(U)
    eye = np.eye(U.shape[-1])
    return np.abs(np.swapaxes(U, -1, -2).conj() @ U - eye).max()


def test_default_slices():
    assert default_slices(FIG1) == 384
    assert default_slices(ModelParams(ratio="2/5")) == 128 * 5 * 2
    assert default_slices(ModelParams(ratio=0)) == 128


@pytest.mark.parametrize("L,N,ratio", [(3, 1, "3/1"), (5, 2, "3/2"), (4, 1, "2/5")])
def test_reduced_grid_is_unitary(L, N, ratio):
    p = ModelParams(T1=2, ratio=ratio, U=4.0)
    chain = Chain(L, N)
    U = reduced_floquet_grid(p, uniform_grid(3), uniform_grid(L)[:3], chain, PropagatorSettings(slices_per_period=96))
    assert U.shape == (3, 3, chain.n_bands, chain.n_bands)
    assert unitarity_error(U) <= 1e-10


def test_full_propagator_unitary_and_norm_preserving():
    chain = Chain(5, 2)
    p = ModelParams(T1=2, ratio="3/2", U=20.0)
    U = propagate_period(0.7, p, chain, settings=PropagatorSettings(slices_per_period=48))
    assert unitarity_error(U) <= 1e-10
    rng = np.random.default_rng(5)
    v = rng.normal(size=U.shape[0]) + 1j * rng.normal(size=U.shape[0])
    assert abs(np.linalg.norm(U @ v) - np.linalg.norm(v)) <= 1e-10 * np.linalg.norm(v)


def test_static_limit_is_cosine_band():
    p = ModelParams(V=0, ratio=0, T1=1.3)
    L = 5
    chain = Chain(L, 1)
    U = propagate_period(0.0, p, chain, settings=PropagatorSettings(slices_per_period=8))
    k = 2 * np.pi * np.arange(3 * L) / (3 * L)
    expected = np.angle(np.exp(-1j * p.J * np.cos(k) * p.T))
    assert phase_set_distance(eigenphases(U), expected) < 1e-10


def test_static_limit_sector_phases():
    p = ModelParams(V=0, ratio=0, T1=1.3)
    phi = 2.0
    U = propagate_period(0.3, p, Chain(3, 1), "sector", PropagatorSettings(slices_per_period=8), phi=phi)
    # sector phi of the three-site cell holds site momenta (phi + 2 pi m) / 3
    k = (phi + 2 * np.pi * np.arange(3)) / 3
    assert phase_set_distance(eigenphases(U), np.angle(np.exp(-1j * p.J * np.cos(k) * p.T))) < 1e-10


def test_no_hopping_no_potential_is_interaction_phases():
    p = ModelParams(J=1e-300, V=0, U=3.0, ratio="3/1")
    chain = Chain(3, 2)
    U = propagate_period(0.4, p, chain, settings=PropagatorSettings(slices_per_period=4))
    double = chain.basis.states.max(axis=1) == 2
    expected = np.where(double, np.exp(-1j * 3.0 * p.T), 1.0)
    assert np.allclose(U, np.diag(expected), atol=1e-12)
    U0 = propagate_period(0.4, ModelParams(J=1e-300, V=0, ratio="3/1"), Chain(3, 1))
    assert np.allclose(U0, np.eye(9), atol=1e-12)


def test_sector_union_equals_full_spectrum():
    chain = Chain(5, 2)
    p = ModelParams(T1=2, ratio="3/2", U=20.0)
    settings = PropagatorSettings(slices_per_period=96)
    beta = float(np.random.default_rng(11).uniform(0, 2 * np.pi))
    full = eigenphases(propagate_period(beta, p, chain, settings=settings))
    union = np.concatenate(
        [eigenphases(reduced_floquet_projection(beta, phi, p, chain, settings).matrix) for phi in uniform_grid(5)]
    )
    assert phase_set_distance(full, union) <= 1e-8


@pytest.mark.parametrize("chain,phi", [(Chain(15, 1), 2.0), (Chain(5, 2), 2 * np.pi * 3 / 5)])
def test_sector_path_matches_projection_path(chain, phi):
    p = FIG1 if chain.basis.N == 1 else ModelParams(T1=2, ratio="3/2", U=20.0)
    fast = reduced_floquet_projection(1.0, phi, p, chain, path="sector").matrix
    ref = reduced_floquet_projection(1.0, phi, p, chain, path="projection").matrix
    assert np.abs(fast - ref).max() <= 1e-8


def test_reduced_operator_beta_periodic():
    chain = Chain(3, 1)
    a = reduced_floquet_projection(0.9, 1.7, FIG1, chain).matrix
    b = reduced_floquet_projection(0.9 + 2 * np.pi, 1.7, FIG1, chain).matrix
    assert np.abs(a - b).max() <= 1e-10


def test_reduced_operator_deterministic():
    chain = Chain(3, 1)
    a = reduced_floquet_grid(FIG1, uniform_grid(4), uniform_grid(4), chain)
    b = reduced_floquet_grid(FIG1, uniform_grid(4), uniform_grid(4), chain)
    assert np.array_equal(a, b)


def test_parallel_grid_matches_serial():
    chain = Chain(3, 1)
    serial = reduced_floquet_grid(FIG1, uniform_grid(6), uniform_grid(5), chain, PropagatorSettings(threads=1))
    pooled = reduced_floquet_grid(FIG1, uniform_grid(6), uniform_grid(5), chain, PropagatorSettings(threads=2))
    assert np.array_equal(serial, pooled)


def test_cf4_is_fourth_order_and_default_is_converged():
    chain = Chain(3, 1)

    def phases(n, scheme="cf4"):
        U = reduced_floquet_projection(0.5, 1.1, FIG1, chain, PropagatorSettings(n, scheme)).matrix
        return eigenphases(U)

    ref = phases(6144)
    e1 = phase_set_distance(phases(96), ref)
    e2 = phase_set_distance(phases(192), ref)
    assert 12 < e1 / e2 < 20
    m1 = phase_set_distance(phases(384, "midpoint"), ref)
    m2 = phase_set_distance(phases(768, "midpoint"), ref)
    assert 3.5 < m1 / m2 < 4.5
    # doubling from the default moves eigenphases by less than 1e-9
    assert phase_set_distance(phases(default_slices(FIG1)), phases(2 * default_slices(FIG1))) < 1e-9


def test_convergence_check_passes_at_default():
    U = propagate_period(
        0.2, FIG1, Chain(3, 1), "sector", PropagatorSettings(check_convergence=True), phi=0.3
    )
    assert U.shape == (3, 3)


def test_sector_source_requires_periodic_boundary():
    with pytest.raises(BoundaryError):
        propagate_period(0.0, FIG1, Chain(3, 1), "sector", phi=0.0, boundary="open")


def test_branch_cut_sits_in_widest_gap():
    cut, width = branch_cut(np.array([-0.1, 0.1, 2.0]))
    assert np.isclose(width, 2 * np.pi - 2.1)
    assert np.isclose(np.mod(cut, 2 * np.pi), np.mod(2.0 + width / 2, 2 * np.pi))


def test_eigen_grid_bands_sorted_from_cut():
    eg = eigen_grid(FIG1, uniform_grid(6), uniform_grid(6), Chain(3, 1))
    assert np.all(np.diff(eg.levels, axis=-1) >= 0)
    # eigenvectors diagonalise the reduced operators
    U = reduced_floquet_grid(FIG1, uniform_grid(6), uniform_grid(6), Chain(3, 1))
    lhs = U @ eg.vectors
    rhs = eg.vectors * np.exp(1j * eg.phases)[..., None, :]
    assert np.abs(lhs - rhs).max() < 1e-10


def test_tilted_bands_flat_along_phi_untilted_dispersive():
    flat = quasienergy_bands(FIG1, (8, 12))
    assert flat.n_bands == 3
    assert flat.sheets.shape == (8, 12, 3)
    untilted = quasienergy_bands(ModelParams(T1=2, ratio=0), (8, 12))
    assert flat.phi_dispersion().max() < 0.1 * untilted.phi_dispersion().max()
    assert untilted.phi_dispersion().min() > 0.05


def test_sheets_are_permutations_of_local_phases():
    bs = quasienergy_bands(FIG1, (5, 7))
    eg = eigen_grid(FIG1, uniform_grid(5), uniform_grid(7), Chain(3, 1))
    assert np.allclose(np.sort(bs.sheets, axis=-1), np.sort(eg.phases, axis=-1))


def test_band_grid_minimum_size():
    with pytest.raises(ValueError):
        quasienergy_bands(FIG1, (3, 8))


def test_continuation_flags_near_degeneracy():
    # V=0, no tilt: the three folded cosine branches cross along phi
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        bs = quasienergy_bands(ModelParams(V=0, ratio=0, T1=2), (4, 9))
    assert bs.n_bands == 3
    if bs.ambiguous:
        assert any(issubclass(w.category, ContinuationAmbiguity) for w in caught)


def test_obc_beta_periodic_and_unitary():
    betas = [0.3, 0.3 + 2 * np.pi]
    spectra = obc_quasienergies(FIG1, betas, 6, PropagatorSettings(slices_per_period=192))
    a, b = spectra.values()
    assert phase_set_distance(a, b) < 1e-10
    phases, vectors = obc_spectrum(FIG1, [0.3], 6, PropagatorSettings(slices_per_period=192))
    assert np.all(np.diff(phases[0]) >= 0)
    assert np.allclose(vectors[0].conj().T @ vectors[0], np.eye(18), atol=1e-10)


def test_obc_without_superlattice_has_no_edge_flow():
    p = ModelParams(V=0, ratio=0, T1=4)
    flow = edge_spectral_flow(p, np.pi / 2, L_open=8, n_beta=24, settings=PropagatorSettings(slices_per_period=64))
    assert flow == {"left": 0, "right": 0}
    spectra = obc_quasienergies(p, [0.0, 1.0, 2.5], 8, PropagatorSettings(slices_per_period=64))
    first = list(spectra.values())[0]
    assert all(phase_set_distance(first, s) < 1e-10 for s in spectra.values())
