"""Bundled configurations for each reproducible figure.

Every figure maps to a list of raw configuration dicts; ``reproduce`` runs
them in order, each into its own sub-directory.
"""
from __future__ import annotations

FIGURES = ("fig1", "fig2", "fig3", "fig4", "fig5", "figA")


def _model(T1, ratio, U=0.0):
    return {"J": 2.5, "V": 2.5, "T1": T1, "ratio": ratio, "U": U}


def _single_particle(tag, T1, ratio, expected_drift, refine=False, pump_initial=("wannier",), obc=True):
    runs = [
        {"name": f"{tag}_bands", "task": "bands", "model": _model(T1, ratio), "numerics": {"grid": [61, 61]}},
        {
            "name": f"{tag}_chern",
            "task": "chern",
            "model": _model(T1, ratio),
            "numerics": {"grid": [24, 24], "refine": refine},
        },
        {
            "name": f"{tag}_pump",
            "task": "pump",
            "model": _model(T1, ratio),
            "numerics": {
                "bands": [0, 1, 2],
                "initial": list(pump_initial),
                "M": 2000,
                "expected_drift": expected_drift,
            },
        },
    ]
    if obc:
        runs.append(
            {
                "name": f"{tag}_obc",
                "task": "obc",
                "model": _model(T1, ratio),
                "numerics": {"L_open": 16, "n_beta": 96},
            }
        )
    return runs


def _two_particle(tag, T1, ratio, U, bands, initial=("wannier",), cut=None, L=21, obc=False):
    model = _model(T1, ratio, U)
    runs = [
        {
            "name": f"{tag}_bands_phi0",
            "task": "bands",
            "model": model,
            "system": {"N": 2, "L": L},
            "numerics": {"grid": [61, 1], "phis": [0.0], "cut": cut},
        },
        {
            "name": f"{tag}_pump",
            "task": "pump",
            "model": model,
            "system": {"N": 2, "L": L},
            "numerics": {"bands": list(bands), "initial": list(initial), "M": 2000, "sigma": 0.7, "cut": cut},
        },
    ]
    if obc:
        runs.append(
            {
                "name": f"{tag}_obc",
                "task": "obc",
                "model": model,
                "system": {"N": 2},
                "numerics": {"L_open": 8, "n_beta": 48},
            }
        )
    return runs


def figure_configs(figure_id: str) -> list[dict]:
    if figure_id == "fig1":
        return _single_particle("T1_2_ratio_3", 2.0, "3/1", 4, pump_initial=("wannier", "gaussian"), obc=False)
    if figure_id == "fig2":
        return (
            _single_particle("T1_4_untilted", 4.0, "0", 8)
            + _single_particle("T1_4_ratio_2_5", 4.0, "2/5", 40, refine=True)
            + _single_particle("T1_4_ratio_5_2", 4.0, "5/2", 8)
        )
    if figure_id == "fig3":
        return _two_particle("U20_ratio_3_2", 2.0, "3/2", 20.0, [-1], ("wannier", "gaussian")) + _two_particle(
            "U20_untilted", 2.0, "0", 20.0, [0, -1], cut="pi"
        )
    if figure_id == "fig4":
        runs = []
        for U in (2.0, 10.0):
            for ratio, tag in (("1/1", "1_1"), ("1/2", "1_2")):
                runs += _two_particle(f"T1_1_U{int(U)}_ratio_{tag}", 1.0, ratio, U, [0, -1], cut="pi", obc=True)
        return runs
    if figure_id == "fig5":
        runs = []
        for ratio, tag in (("5/7", "5_7"), ("7/10", "7_10"), ("8/11", "8_11")):
            runs += _single_particle(f"T1_4_ratio_{tag}", 4.0, ratio, 0, refine=True)
            runs[-2]["numerics"]["bands"] = [0]
        return runs
    if figure_id == "figA":
        return [
            {
                "name": "momentum_density",
                "task": "momentum",
                "model": _model(2.0, "4/1"),
                "system": {"N": 1, "L": 500},
                "numerics": {"samples": 200, "zone": "cell"},
            },
            {
                "name": "momentum_density_site_zone",
                "task": "momentum",
                "model": _model(2.0, "4/1"),
                "system": {"N": 1, "L": 500},
                "numerics": {"samples": 200, "zone": "site"},
            },
        ]
    raise KeyError(figure_id)
