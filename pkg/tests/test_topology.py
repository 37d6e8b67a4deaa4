import numpy as np
import pytest

from floqbloch.errors import GapClosure, NumericalError
from floqbloch.floquet import PropagatorSettings, eigen_grid
from floqbloch.hamiltonian import Chain, ModelParams
from floqbloch.topology import (
    TorusGrid,
    auto_groups,
    band_chern,
    boundary_gaps,
    chern_all,
    chern_from_vectors,
    group_chern,
    plaquette_flux,
)

FIG1 = ModelParams(T1=2, ratio="3/1")


@pytest.fixture(scope="module")
def fig1_grid():
    g = TorusGrid(24, 24)
    return eigen_grid(FIG1, g.betas, g.phis, Chain(3, 1))


def test_fig1_chern_numbers(fig1_grid):
    assert [group_chern(fig1_grid, [n]) for n in range(3)] == [-2, 4, -2]
    cs = chern_all(FIG1, TorusGrid(24, 24))
    assert cs.chern == [-2, 4, -2]
    assert cs.band_groups == [[0], [1], [2]]
    assert all(cs.gap_ok)


def test_band_chern_accepts_negative_index():
    assert band_chern(FIG1, TorusGrid(24, 24), -1) == -2


def test_gauge_invariance_under_random_phases(fig1_grid):
    rng = np.random.default_rng(7)
    for n in range(3):
        v = fig1_grid.vectors[..., [n]]
        phases = np.exp(2j * np.pi * rng.random(v.shape[:2] + (1, 1)))
        assert chern_from_vectors(v * phases) == chern_from_vectors(v)
    # the non-Abelian link is invariant under a random unitary within the group
    v = fig1_grid.vectors[..., [0, 1]]
    q, _ = np.linalg.qr(rng.normal(size=v.shape[:2] + (2, 2)) + 1j * rng.normal(size=v.shape[:2] + (2, 2)))
    assert chern_from_vectors(v @ q) == chern_from_vectors(v) == 2


def test_plaquette_flux_sums_to_integer(fig1_grid):
    flux = plaquette_flux(fig1_grid.vectors[..., [1]])
    assert flux.shape == (24, 24)
    assert np.all(np.abs(flux) < np.pi)
    assert np.isclose(flux.sum() / (2 * np.pi), 4, atol=1e-9)


def test_refinement_leaves_integers_unchanged():
    coarse = chern_all(FIG1, TorusGrid(24, 24))
    fine = chern_all(FIG1, TorusGrid(48, 48))
    assert coarse.chern == fine.chern
    refined = chern_all(FIG1, TorusGrid(12, 12), refine=True)
    assert refined.chern == [-2, 4, -2]
    assert len(refined.history) >= 2


def test_no_superlattice_gives_zero():
    # with V=0 the three folded bands touch, so they form one group
    cs = chern_all(ModelParams(V=0, T1=2, ratio="3/1"), TorusGrid(8, 8))
    assert all(c == 0 for c in cs.chern)


def test_cut_shift_invariance():
    g = TorusGrid(16, 16)
    chain = Chain(3, 1)
    auto = eigen_grid(FIG1, g.betas, g.phis, chain)
    gaps = boundary_gaps(auto.levels).reshape(-1, 3)
    # place the cut anywhere inside the gap above band 2 instead of at its middle
    lo = auto.cut - 0.4 * auto.cut_width
    shifted = eigen_grid(FIG1, g.betas, g.phis, chain, cut=lo)
    assert [group_chern(shifted, [n]) for n in range(3)] == [group_chern(auto, [n]) for n in range(3)]
    assert gaps.min() > 0


def test_sum_rule_and_untilted_set():
    cs = chern_all(ModelParams(T1=4, ratio=0), TorusGrid(24, 24))
    assert sum(cs.chern) == 0
    assert cs.chern == [4, -8, 4]


def test_gap_closure_reports_point():
    # without the superlattice the bands touch; asking for one alone must fail
    g = TorusGrid(8, 8)
    eg = eigen_grid(ModelParams(V=0, T1=2, ratio="3/1"), g.betas, g.phis, Chain(3, 1))
    with pytest.raises(GapClosure) as info:
        group_chern(eg, [0])
    assert info.value.point is not None
    assert len(info.value.point) == 2


def test_auto_groups_merge_touching_bands():
    levels = np.zeros((2, 2, 4))
    levels[..., 0] = 0.0
    levels[..., 1] = 1.0
    levels[..., 2] = 1.0  # touches band 1
    levels[..., 3] = 3.0
    assert auto_groups(levels) == [[0], [1, 2], [3]]


def test_group_must_be_contiguous(fig1_grid):
    with pytest.raises(ValueError):
        group_chern(fig1_grid, [0, 2])


def test_for_chain_pins_phi_to_ring_momenta():
    assert TorusGrid.for_chain(Chain(21, 2)) == TorusGrid(16, 21)
    assert TorusGrid.for_chain(Chain(3, 1)) == TorusGrid(16, 24)
    assert TorusGrid(8, 21).refined(phi=False) == TorusGrid(16, 21)


def test_sum_rule_violation_is_raised_not_returned():
    # five ring momenta are far too few for the two-particle bands
    chain = Chain(5, 2)
    p = ModelParams(T1=2, ratio="3/2", U=20.0)
    with pytest.raises(NumericalError, match="sum to zero"):
        chern_all(p, TorusGrid.for_chain(chain, n_beta=8), chain=chain, settings=PropagatorSettings(96))
