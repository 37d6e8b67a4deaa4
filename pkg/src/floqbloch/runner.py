"""Task dispatch for experiment configurations.

Each task writes its tables through an :class:`OutputWriter` and returns a
result summary; :func:`run` wraps it with the manifest (config echo, clock,
timing, file checksums), written after every other file.
"""
from __future__ import annotations

import math
import platform
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .errors import ConfigError
from .floquet import (
    PropagatorSettings,
    eigen_grid,
    obc_spectrum,
    quasienergy_bands,
    uniform_grid,
)
from .fock import CELL, DEFAULT_DIMENSION_CAP, fock_dimension
from .hamiltonian import Chain
from .output import OutputWriter
from .pumping import FLAGSHIP_M, PumpProtocol, drift_tolerance, momentum_movie, run_pump_batch
from .topology import TorusGrid, chern_all

SIGN_CONVENTION = "U|psi> = exp(+i eps)|psi>, eps in (-pi, pi]"


def settings_from(config: ExperimentConfig) -> PropagatorSettings:
    num = config.numerics
    return PropagatorSettings(
        slices_per_period=num["slices_per_period"],
        scheme=num["scheme"],
        convergence_tol=num["convergence_tol"],
        check_convergence=num["check_convergence"],
        threads=num["threads"] or 0,
    )


def _cut(config: ExperimentConfig):
    cut = config.numerics["cut"]
    return math.pi if cut == "pi" else cut


def _chain(config: ExperimentConfig, default_L: int, seed_cap: int | None) -> Chain:
    N = config.system["N"]
    L = config.system["L"] or default_L
    D = fock_dimension(L, N)
    cap = seed_cap or DEFAULT_DIMENSION_CAP
    if D > cap:
        raise ConfigError(f"system: basis dimension {D} for L={L}, N={N} exceeds the cap {cap}")
    return Chain(L=L, N=N, cap=cap)


def _default_ring(N: int) -> int:
    return 3 if N == 1 else 21


# --------------------------------------------------------------------------
# tasks


def task_bands(config, writer: OutputWriter, seed_cap=None) -> dict:
    params, settings = config.params, settings_from(config)
    chain = _chain(config, _default_ring(config.system["N"]), seed_cap)
    num = config.numerics
    if num["phis"] is not None or not chain.sector.continuous:
        n_beta = (num["grid"] or [61, 0])[0]
        phis = num["phis"] if num["phis"] is not None else uniform_grid(chain.L)
        eg = eigen_grid(params, uniform_grid(n_beta), phis, chain, settings, cut=_cut(config))
        betas, phis, sheets, cut, ambiguous = eg.betas, eg.phis, eg.phases, eg.cut, []
        labels = "sorted upward from the cut"
    else:
        grid = tuple(num["grid"] or (61, 61))
        bs = quasienergy_bands(params, grid, chain, settings)
        betas, phis, sheets, cut, ambiguous = bs.betas, bs.phis, bs.sheets, bs.cut, bs.ambiguous
        labels = "continued along phi by eigenvector overlap"
    rows = (
        (float(b), float(p), n, float(sheets[i, j, n]))
        for i, b in enumerate(betas)
        for j, p in enumerate(phis)
        for n in range(sheets.shape[-1])
    )
    writer.table(
        "bands",
        ["beta", "phi", "band", "quasienergy"],
        rows,
        {"band_labels": labels, "sign_convention": SIGN_CONVENTION, "cut": cut},
    )
    levels = np.mod(sheets - cut, 2 * np.pi)
    return {
        "grid": [len(betas), len(phis)],
        "n_bands": int(sheets.shape[-1]),
        "cut": float(cut),
        "ambiguous_points": len(ambiguous),
        "phi_dispersion": np.ptp(levels, axis=1).max(axis=0).tolist(),
        "beta_dispersion": np.ptp(levels, axis=0).max(axis=0).tolist(),
    }


def task_chern(config, writer: OutputWriter, seed_cap=None) -> dict:
    params, settings = config.params, settings_from(config)
    chain = _chain(config, _default_ring(config.system["N"]), seed_cap)
    num = config.numerics
    if num["grid"] is not None:
        if min(num["grid"]) < 2:
            raise ConfigError("numerics.grid: a torus grid needs at least 2 points per direction")
        grid = TorusGrid(*num["grid"])
    else:
        grid = TorusGrid.for_chain(chain, 24 if chain.N == 1 else 16)
    if not chain.sector.continuous and grid.n_phi != chain.L:
        raise ConfigError(
            f"numerics.grid: with N={chain.N} the phi axis must have L={chain.L} points"
        )
    result = chern_all(
        params,
        grid,
        grouping=num["groups"],
        chain=chain,
        settings=settings,
        gap_floor=num["gap_floor"],
        refine=num["refine"],
        cut=_cut(config),
    )
    doc = result.as_dict()
    writer.document("chern", doc)
    return doc


def task_obc(config, writer: OutputWriter, seed_cap=None) -> dict:
    params, settings = config.params, settings_from(config)
    num = config.numerics
    N = config.system["N"]
    L_open = num["L_open"]
    D = fock_dimension(L_open, N)
    if D > min(seed_cap or DEFAULT_DIMENSION_CAP, 4096):
        raise ConfigError(f"numerics.L_open: open-chain dimension {D} is too large for dense propagation")
    betas = uniform_grid(num["n_beta"])
    phases, vectors = obc_spectrum(params, betas, L_open, settings, N=N)
    basis = Chain(L=L_open, N=N).basis
    occ = basis.states.astype(float)
    dens = np.einsum("bdk,ds->bks", np.abs(vectors) ** 2, occ) / N
    w = CELL * min(3, L_open)
    left, right = dens[..., :w].sum(-1), dens[..., -w:].sum(-1)
    rows = (
        (float(b), k, float(phases[i, k]), float(left[i, k]), float(right[i, k]))
        for i, b in enumerate(betas)
        for k in range(phases.shape[1])
    )
    writer.table(
        "obc",
        ["beta", "index", "quasienergy", "left_weight", "right_weight"],
        rows,
        {"L_open": L_open, "edge_cells": 3, "sign_convention": SIGN_CONVENTION},
    )
    return {"L_open": L_open, "n_beta": len(betas), "dimension": int(D)}


def task_pump(config, writer: OutputWriter, seed_cap=None) -> dict:
    params, settings = config.params, settings_from(config)
    num = config.numerics
    protocol = PumpProtocol(
        M=num["M"],
        sigma=num["sigma"],
        R0=num["R0"],
        N=config.system["N"],
        L=config.system["L"],
        expected_drift=num["expected_drift"],
        cut=_cut(config),
    )
    trajs = run_pump_batch(params, num["bands"], num["initial"], protocol, settings)
    summary = []
    for tr in trajs:
        kind = tr.diagnostics["initial"]
        stem = f"pump_band{tr.band}_{kind}"
        writer.table(
            stem,
            ["m", "x_com"],
            zip(tr.m.tolist(), tr.x_com.tolist()),
            {"band": tr.band, "initial": kind, "L": tr.L, "M": num["M"]},
        )
        summary.append(
            {
                "band": tr.band,
                "initial": kind,
                "drift": tr.drift,
                "L": tr.L,
                "ring_growths": tr.growths,
                "max_edge_density": tr.max_edge_density,
                "max_norm_drift": tr.max_norm_drift,
                "file": f"{stem}.{writer.fmt}",
            }
        )
    M, expected = num["M"], num["expected_drift"]
    return {
        "trajectories": summary,
        "M": M,
        "variant": "flagship" if M >= FLAGSHIP_M else "reduced-M",
        "drift_tolerance": drift_tolerance(expected, M),
    }


def task_momentum(config, writer: OutputWriter, seed_cap=None) -> dict:
    params = config.params
    num = config.numerics
    L = config.system["L"] or 500
    movie = momentum_movie(
        params, L=L, samples=num["samples"], width_cells=num["width_cells"], zone=num["zone"]
    )
    t, k, dens = movie["t"], movie["k"], movie["density"]
    writer.table(
        "momentum_density",
        ["t", "k", "density"],
        ((float(t[i]), float(k[j]), float(dens[i, j])) for i in range(len(t)) for j in range(len(k))),
        {"zone": num["zone"], "L": L},
    )
    writer.table("momentum_argmax", ["t", "k_argmax"], zip(t.tolist(), movie["argmax"].tolist()))
    return {"L": L, "zone": num["zone"], "samples": len(t), "sweeps": sweep_count(movie)}


def sweep_count(movie: dict) -> float:
    """Net number of zone traversals of the argmax over the movie."""
    k = movie["argmax"]
    span = 2 * np.pi
    step = np.angle(np.exp(1j * np.diff(k)))
    return float(abs(step.sum()) / span)


TASKS = {
    "bands": task_bands,
    "chern": task_chern,
    "obc": task_obc,
    "pump": task_pump,
    "momentum": task_momentum,
}


def run(
    config: ExperimentConfig,
    out_dir=None,
    seed_cap: int | None = None,
) -> tuple[dict, Path]:
    """Execute one configuration; returns the manifest and its path."""
    out = Path(out_dir or config.output["dir"])
    writer = OutputWriter(out, config.output["format"], {"run_id": config.digest(), "task": config.task})
    start = time.perf_counter()
    result = TASKS[config.task](config, writer, seed_cap)
    wall = time.perf_counter() - start
    settings = settings_from(config)
    manifest = {
        "config": config.echo(),
        "run_id": config.digest(),
        "clock": config.params.clock(),
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_time_s": round(wall, 3),
        "diagnostics": {
            "slices_per_period": settings.slices(config.params),
            "scheme": settings.scheme,
            "convergence_checked": settings.check_convergence,
            "convergence_tol": settings.convergence_tol,
            "sign_convention": SIGN_CONVENTION,
        },
        "result": result,
    }
    path = writer.manifest(manifest)
    return manifest, path
