"""Command-line front end.

    floqbloch run --config exp.yaml [--out DIR]
    floqbloch reproduce fig1 --out DIR

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 boundary contamination.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .config import ExperimentConfig
from .errors import BasisError, BoundaryContamination, ConfigError, NumericalError
from .figures import FIGURES, figure_configs
from .output import OutputWriter, sha256_file
from .runner import run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_BOUNDARY = 0, 2, 3, 4

log = logging.getLogger("floqbloch")


def _overrides(args) -> dict:
    return {"threads": args.threads, "slices_per_period": args.slices}


def _estimate_pump_seconds(config: ExperimentConfig) -> float | None:
    """Rough wall-time of a two-particle pump from a short timed run."""
    if config.task != "pump" or config.system["N"] < 2:
        return None
    import numpy as np

    from .pumping import SplitStepRing
    from .runner import settings_from

    params = config.params
    L = config.system["L"] or 21
    ring = SplitStepRing(params, 3 * L, config.system["N"])
    n_traj = len(config.numerics["bands"]) * len(config.numerics["initial"])
    psi = np.zeros((n_traj,) + (3 * L,) * config.system["N"], dtype=complex)
    psi[(slice(None),) + (0,) * config.system["N"]] = 1.0
    steps = 16
    start = time.perf_counter()
    ring.evolve(psi, 0.0, 0.0, params.T * steps / 1000, steps)
    per_step = (time.perf_counter() - start) / steps
    return per_step * settings_from(config).slices(params) * config.numerics["M"]


def _run_one(config: ExperimentConfig, out: Path, seed_cap) -> dict:
    estimate = _estimate_pump_seconds(config)
    if estimate is not None:
        print(f"[{config.name}] estimated pump time: {estimate / 60:.1f} min", flush=True)
    manifest, path = run(config, out, seed_cap=seed_cap)
    print(f"[{config.name}] done in {manifest['wall_time_s']:.1f} s -> {path}", flush=True)
    return {"name": config.name, "manifest": path, "result": manifest["result"]}


def cmd_run(args) -> int:
    config = ExperimentConfig.load(args.config).with_overrides(**_overrides(args))
    _run_one(config, Path(args.out or config.output["dir"]), args.seed_cap)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.figure_id not in FIGURES:
        raise ConfigError(f"figure_id: unknown figure {args.figure_id!r}; choose from {', '.join(FIGURES)}")
    root = Path(args.out) / args.figure_id
    configs = [
        ExperimentConfig.from_dict(raw).with_overrides(**_overrides(args))
        for raw in figure_configs(args.figure_id)
    ]
    index = OutputWriter(root)
    runs = []
    for config in configs:
        info = _run_one(config, root / config.name, args.seed_cap)
        runs.append(
            {
                "name": config.name,
                "task": config.task,
                "manifest": info["manifest"].relative_to(root).as_posix(),
                "sha256": sha256_file(info["manifest"]),
            }
        )
    index.manifest({"figure": args.figure_id, "code_version": __version__, "runs": runs})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")
    common.add_argument("--slices", type=int, default=None, help="time slices per common period")
    common.add_argument("--seed-cap", type=int, default=None, dest="seed_cap", help="maximum Fock dimension")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="floqbloch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", parents=[common], help="run one experiment configuration")
    p_run.add_argument("--config", required=True, type=Path)
    p_run.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    p_run.set_defaults(func=cmd_run)
    p_rep = sub.add_parser("reproduce", parents=[common], help="run the bundled configs of a figure")
    p_rep.add_argument("figure_id", help=", ".join(FIGURES))
    p_rep.add_argument("--out", required=True)
    p_rep.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    for flag in ("threads", "slices", "seed_cap"):
        value = getattr(args, flag)
        if value is not None and value < 1:
            print(f"error: --{flag.replace('_', '-')} must be positive", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, BasisError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BoundaryContamination as exc:
        print(f"boundary contamination: {exc}", file=sys.stderr)
        return EXIT_BOUNDARY
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
