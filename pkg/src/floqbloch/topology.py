"""Chern numbers of Floquet bands on the (beta, phi) torus.

Link variables are determinants of overlap matrices between neighbouring
grid points, so touching bands can be treated as one group.  Orientation is
(phi, beta): with this convention the Chern number of a band equals the drift
of the centre of mass over one pump cycle, in unit cells.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GapClosure, NonIntegerResult, NumericalError
from .floquet import EigenGrid, PropagatorSettings, eigen_grid, uniform_grid
from .hamiltonian import Chain, ModelParams

DEFAULT_GAP_FLOOR = 1e-6
INTEGER_TOL = 1e-6


@dataclass(frozen=True)
class TorusGrid:
    n_beta: int = 24
    n_phi: int = 24

    def __post_init__(self):
        if self.n_beta < 2 or self.n_phi < 2:
            raise ValueError("torus grids need at least 2 points per direction")

    @property
    def betas(self) -> np.ndarray:
        return uniform_grid(self.n_beta)

    @property
    def phis(self) -> np.ndarray:
        return uniform_grid(self.n_phi)

    def refined(self, phi: bool = True) -> "TorusGrid":
        return TorusGrid(2 * self.n_beta, 2 * self.n_phi if phi else self.n_phi)

    @classmethod
    def for_chain(cls, chain: Chain, n_beta: int = 16, n_phi: int = 24) -> "TorusGrid":
        """Grid usable with ``chain``: with several particles phi runs over the
        ``L`` ring momenta, otherwise ``n_phi`` points."""
        if chain.sector.continuous:
            return cls(n_beta, n_phi)
        return cls(n_beta, chain.L)


@dataclass
class ChernSet:
    """Chern numbers per band group.

    ``gap_ok[k]`` tells whether the gap above group ``k`` (the last entry is
    the gap across the branch cut) stays open everywhere on the grid.
    """

    band_groups: list[list[int]]
    chern: list[int]
    gap_ok: list[bool]
    min_gaps: list[float]
    grid: TorusGrid
    cut: float
    history: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "groups": self.band_groups,
            "chern": self.chern,
            "gap_ok": self.gap_ok,
            "min_gaps": self.min_gaps,
            "grid": [self.grid.n_beta, self.grid.n_phi],
            "cut": self.cut,
            "refinement_history": self.history,
        }


def _links(vectors: np.ndarray, axis: int) -> np.ndarray:
    nxt = np.roll(vectors, -1, axis=axis)
    overlap = np.swapaxes(vectors, -1, -2).conj() @ nxt
    det = np.linalg.det(overlap)
    mag = np.abs(det)
    if np.any(mag < 1e-12):
        raise NumericalError("vanishing link overlap; the grid is too coarse")
    return det / mag


def plaquette_flux(vectors: np.ndarray) -> np.ndarray:
    """Berry flux through every plaquette, shape ``(n_beta, n_phi)``.

    ``vectors`` has shape ``(n_beta, n_phi, dim, g)``: the ``g`` orthonormal
    columns spanning the band group at each grid point.
    """
    u_phi = _links(vectors, axis=1)
    u_beta = _links(vectors, axis=0)
    loop = u_phi * np.roll(u_beta, -1, axis=1) / (np.roll(u_phi, -1, axis=0) * u_beta)
    return np.angle(loop)


def chern_from_vectors(vectors: np.ndarray) -> int:
    total = plaquette_flux(vectors).sum() / (2 * np.pi)
    c = round(total)
    if abs(total - c) > INTEGER_TOL:
        raise NonIntegerResult(f"plaquette sum {total:.9f} is not an integer; refine the grid")
    return int(c)


def boundary_gaps(levels: np.ndarray) -> np.ndarray:
    """Gap above each band (last entry wraps across the cut), per grid point."""
    upper = np.concatenate([levels[..., 1:], levels[..., :1] + 2 * np.pi], axis=-1)
    return upper - levels


def auto_groups(levels: np.ndarray, gap_floor: float = DEFAULT_GAP_FLOOR) -> list[list[int]]:
    """Merge neighbouring bands whose gap closes (below ``gap_floor``) anywhere."""
    n = levels.shape[-1]
    open_above = boundary_gaps(levels).reshape(-1, n).min(axis=0) > gap_floor
    if not open_above[-1]:
        raise GapClosure("no quasienergy gap stays open across the whole grid")
    groups, current = [], []
    for k in range(n):
        current.append(k)
        if open_above[k]:
            groups.append(current)
            current = []
    return groups


def _check_isolated(eg: EigenGrid, group: Sequence[int], gap_floor: float):
    gaps = boundary_gaps(eg.levels)
    n = eg.n_bands
    for k in (group[0] - 1) % n, group[-1]:
        g = gaps[..., k]
        worst = np.unravel_index(np.argmin(g), g.shape)
        if g[worst] <= gap_floor:
            point = (float(eg.betas[worst[0]]), float(eg.phis[worst[1]]))
            raise GapClosure(
                f"band group {list(group)} touches its neighbour (gap {g[worst]:.2e}) "
                f"at beta={point[0]:.4f}, phi={point[1]:.4f}",
                point=point,
            )


def group_chern(eg: EigenGrid, group: Sequence[int], gap_floor: float = DEFAULT_GAP_FLOOR) -> int:
    group = list(group)
    if group != list(range(group[0], group[-1] + 1)):
        raise ValueError(f"band group must be a contiguous range, got {group}")
    if len(group) < eg.n_bands:
        _check_isolated(eg, group, gap_floor)
    return chern_from_vectors(eg.vectors[..., group])


def band_chern(
    params: ModelParams,
    grid: TorusGrid,
    group: Sequence[int] | int,
    chain: Chain | None = None,
    settings: PropagatorSettings | None = None,
    gap_floor: float = DEFAULT_GAP_FLOOR,
    cut: float | None = None,
) -> int:
    chain = chain or Chain(L=3, N=1)
    if isinstance(group, (int, np.integer)):
        group = [int(group)]
    group = [g % chain.n_bands for g in group]
    eg = eigen_grid(params, grid.betas, grid.phis, chain, settings, cut=cut)
    return group_chern(eg, group, gap_floor)


def _chern_on_grid(eg: EigenGrid, grouping, gap_floor):
    levels = eg.levels
    if grouping == "auto":
        groups = auto_groups(levels, gap_floor)
    else:
        groups = [[g % eg.n_bands for g in grp] for grp in grouping]
    gaps = boundary_gaps(levels).reshape(-1, eg.n_bands).min(axis=0)
    min_gaps = [float(gaps[grp[-1]]) for grp in groups]
    chern = [group_chern(eg, grp, gap_floor) for grp in groups]
    return groups, chern, [g > gap_floor for g in min_gaps], min_gaps


def chern_all(
    params: ModelParams,
    grid: TorusGrid = TorusGrid(),
    grouping="auto",
    chain: Chain | None = None,
    settings: PropagatorSettings | None = None,
    gap_floor: float = DEFAULT_GAP_FLOOR,
    refine: bool = False,
    max_points: int = 192,
    cut: float | None = None,
) -> ChernSet:
    """Chern number of every band group.

    With ``refine=True`` the grid is doubled until two successive grids give
    identical integers (only along beta when phi is pinned to ring momenta) (or ``max_points`` per direction is exceeded, which
    raises :class:`NonIntegerResult`).
    """
    chain = chain or Chain(L=3, N=1)
    history = []
    previous = None
    while True:
        eg = eigen_grid(params, grid.betas, grid.phis, chain, settings, cut=cut)
        try:
            groups, chern, gap_ok, min_gaps = _chern_on_grid(eg, grouping, gap_floor)
            stable_sum = sum(chern) == 0 or len(groups) < 1
        except (NonIntegerResult, NumericalError) as exc:
            if not refine or isinstance(exc, GapClosure):
                raise
            groups, chern, gap_ok, min_gaps, stable_sum = None, None, None, None, False
        history.append({"grid": [grid.n_beta, grid.n_phi], "chern": chern})
        if not refine:
            if not stable_sum:
                raise NumericalError(f"Chern numbers {chern} do not sum to zero; refine the grid")
            break
        if stable_sum and previous is not None and previous == (groups, chern):
            break
        previous = (groups, chern) if stable_sum else None
        if 2 * max(grid.n_beta, grid.n_phi) > max_points:
            raise NonIntegerResult(
                f"Chern numbers not stable up to {grid.n_beta}x{grid.n_phi}: {history}"
            )
        grid = grid.refined(phi=chain.sector.continuous)
    return ChernSet(groups, chern, gap_ok, min_gaps, grid, eg.cut, history)
