"""Command-line entry point.

Subcommands:
  run     one experiment: synthesize data, run the chain, write outputs
  sweep   cartesian parameter sweep with per-run subdirectories
  resume  continue a run from its checkpoint
  gen     emit the trial field and boundary data only

Outputs are plot-ready CSVs plus a JSON manifest with checksums; images
are left to external plotters. Exit codes: 0 success, 1 validation,
2 runtime failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .chain import ChainError, ChainResult, checkpoint_load, run_chain
from .config import ConfigError, RunConfig, parse_config
from .forward import SolverError
from .grid import (
    field_from_csv,
    field_to_csv,
    trace_from_csv,
    trace_to_csv,
)
from .proposals import RngStream, derive_seed
from .trials import reconstruction_error, synthesize_data

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_IO = 3

# noise RNG stream index, distinct from every chain index
_DATA_STREAM_INDEX = 0x0DA7A


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _trace_csv(result: ChainResult) -> str:
    lines = ["iteration,misfit,acceptance_rate"]
    for it, f, rate in result.trace:
        lines.append(f"{int(it)},{f!r},{rate!r}")
    return "\n".join(lines) + "\n"


def _update_counts_csv(result: ChainResult) -> str:
    lines = []
    for row in result.update_counts:
        lines.append(",".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def make_data(cfg: RunConfig):
    """Build mesh, physics, target field, and synthetic boundary data."""
    mesh = cfg.mesh()
    phys = cfg.physics()
    K_correct = cfg.trial_spec().build(mesh)
    rng = RngStream(derive_seed(cfg.seed, _DATA_STREAM_INDEX))
    d = synthesize_data(K_correct, mesh, phys, noise_std=cfg.noise_std, rng=rng)
    return mesh, phys, K_correct, d


def run_experiment(cfg: RunConfig, out_dir: str | Path) -> dict:
    """Execute one configured run and write all outputs; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")

    mesh, phys, K_correct, d = make_data(cfg)
    checkpoint = out / "checkpoint.bin"
    result = run_chain(
        d,
        mesh,
        phys,
        cfg.mcmc(),
        k0=cfg.initial_conductivity(),
        checkpoint_path=checkpoint,
        checkpoint_every=cfg.checkpoint_every or None,
    )
    return _write_outputs(cfg, out, started, mesh, K_correct, d, result)


def _write_outputs(cfg, out: Path, started, mesh, K_correct, d, result: ChainResult) -> dict:
    _write(out / "K_correct.csv", field_to_csv(mesh, K_correct.values))
    _write(out / "K_final.csv", field_to_csv(mesh, result.final.values))
    _write(out / "boundary_data.csv", trace_to_csv(d))
    _write(out / "trace.csv", _trace_csv(result))
    _write(out / "update_counts.csv", _update_counts_csv(result))
    for it, values in result.snapshots:
        _write(out / f"snapshot_{it:010d}.csv", field_to_csv(mesh, values))

    mean_abs, rms, max_abs = reconstruction_error(result.final, K_correct)
    files = sorted(p.name for p in out.iterdir() if p.name != "manifest.json")
    manifest = {
        "tool": "fincond",
        "version": __version__,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "wall_time_seconds": result.wall_time,
        "iterations": result.iterations,
        "error": {"mean_abs": mean_abs, "rms": rms, "max_abs": max_abs},
        "acceptance": {
            "accepted": result.accept_count,
            "rate": result.acceptance_rate,
            "floor_rejects": result.floor_reject_count,
            "slope_degenerate_summands": result.slope_degenerate_count,
        },
        "final_misfit": result.final_misfit,
        "best_misfit": result.best_misfit,
        "files": {name: _sha256(out / name) for name in files},
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return manifest


def resume_experiment(out_dir: str | Path, iterations: int | None = None) -> dict:
    """Continue a run from its checkpoint up to a (possibly larger) budget."""
    out = Path(out_dir)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"{out}: no manifest.json; nothing to resume")
    manifest = json.loads(manifest_path.read_text())
    cfg = RunConfig(**manifest["config"]).validate()
    if iterations is not None:
        cfg = replace(cfg, iterations=iterations)
        cfg.validate()
    state = checkpoint_load(out / "checkpoint.bin")
    d = trace_from_csv((out / "boundary_data.csv").read_text())
    correct_mesh, correct_values = field_from_csv((out / "K_correct.csv").read_text())
    if correct_mesh != state.mesh:
        raise ConfigError("checkpoint mesh does not match the run directory")

    from .chain import ChainRunner  # local import to keep module load light
    from .grid import ConductivityField

    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    runner = ChainRunner(d, state.mesh, cfg.physics(), cfg.mcmc())
    result = runner.run(
        initial_state=state,
        checkpoint_path=out / "checkpoint.bin",
        checkpoint_every=cfg.checkpoint_every or None,
    )
    K_correct = ConductivityField(correct_mesh, correct_values)
    return _write_outputs(cfg, out, started, state.mesh, K_correct, d, result)


def generate_only(cfg: RunConfig, out_dir: str | Path) -> dict:
    """Write the target field and its synthetic boundary data, no chain run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mesh, _, K_correct, d = make_data(cfg)
    _write(out / "K_correct.csv", field_to_csv(mesh, K_correct.values))
    _write(out / "boundary_data.csv", trace_to_csv(d))
    return {name: _sha256(out / name) for name in ("K_correct.csv", "boundary_data.csv")}


# --------------------------------------------------------------------------
# sweep


def parse_grid(vary: list[str]) -> tuple[list[str], list[tuple[str, ...]]]:
    """Parse --vary key=v1,v2,... flags into axis names and the cartesian grid."""
    if not vary:
        raise ConfigError("sweep requires at least one --vary key=v1,v2,... axis")
    keys, axes = [], []
    for spec in vary:
        if "=" not in spec:
            raise ConfigError(f"--vary expects key=v1,v2,... (got {spec!r})")
        key, raw = spec.split("=", 1)
        values = [v.strip() for v in raw.split(",") if v.strip()]
        if not values:
            raise ConfigError(f"--vary {key}: empty value list")
        keys.append(key.strip())
        axes.append(values)
    return keys, list(itertools.product(*axes))


def _run_grid_point(args):
    base_dict, keys, point, index, master_seed, out_dir = args
    overrides = dict(zip(keys, point))
    overrides["seed"] = str(derive_seed(master_seed, index))
    cfg = parse_config(None, {**base_dict, **overrides})
    run_dir = Path(out_dir) / f"run_{index:04d}"
    manifest = run_experiment(cfg, run_dir)
    return index, dict(zip(keys, point)), manifest


def sweep(
    base_cfg: RunConfig, vary: list[str], out_dir: str | Path, jobs: int = 1
) -> list[dict]:
    """One run per grid point with derived seeds; failures do not stop the sweep."""
    keys, points = parse_grid(vary)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base_dict = {k: str(v) for k, v in base_cfg.to_dict().items()}

    tasks = [
        (base_dict, keys, point, idx, base_cfg.seed, str(out))
        for idx, point in enumerate(points)
    ]
    completed, failures = [], []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_run_grid_point, t): t for t in tasks}
            for fut, task in futures.items():
                try:
                    completed.append(fut.result())
                except Exception as exc:
                    failures.append({"index": task[3], "params": dict(zip(keys, task[2])),
                                     "error": str(exc)})
    else:
        for task in tasks:
            try:
                completed.append(_run_grid_point(task))
            except Exception as exc:
                failures.append({"index": task[3], "params": dict(zip(keys, task[2])),
                                 "error": str(exc)})

    completed.sort(key=lambda item: item[0])
    header = ["index", *keys, "seed", "mean_abs", "rms", "max_abs", "acceptance_rate"]
    rows = [",".join(header)]
    for index, params, manifest in completed:
        rows.append(",".join([
            str(index),
            *[params[k] for k in keys],
            str(manifest["seed"]),
            repr(manifest["error"]["mean_abs"]),
            repr(manifest["error"]["rms"]),
            repr(manifest["error"]["max_abs"]),
            repr(manifest["acceptance"]["rate"]),
        ]))
    _write(out / "summary.csv", "\n".join(rows) + "\n")
    if failures:
        _write(out / "failures.json", json.dumps(failures, indent=2) + "\n")
    return [manifest for _, _, manifest in completed]


# --------------------------------------------------------------------------
# argument parsing

_OVERRIDE_FLAGS = [
    "m", "n", "Lx", "Ly", "H", "delta", "q", "contact_fraction",
    "trial", "trial_value", "divisor", "noise_std",
    "lambda", "mu", "w", "sigma", "epsilon0",
    "kernel", "omega_bound", "kappa_min",
    "iterations", "k0", "seed", "thin", "snapshot_count", "checkpoint_every",
]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--out", required=True, help="output directory")
    for flag in _OVERRIDE_FLAGS:
        parser.add_argument(f"--{flag}", dest=f"cfg_{flag}", metavar="V")


def _collect_overrides(args: argparse.Namespace) -> dict:
    out = {}
    for flag in _OVERRIDE_FLAGS:
        val = getattr(args, f"cfg_{flag}", None)
        if val is not None:
            out[flag] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fincond",
        description="Reconstruct a cooling fin's conductivity from boundary temperatures.",
    )
    parser.add_argument("--version", action="version", version=f"fincond {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="run a cartesian parameter sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--vary", action="append", default=[],
                         metavar="KEY=V1,V2,...", help="sweep axis (repeatable)")
    p_sweep.add_argument("--jobs", type=int, default=1, help="concurrent runs")

    p_resume = sub.add_parser("resume", help="continue a run from its checkpoint")
    p_resume.add_argument("--out", required=True, help="existing run directory")
    p_resume.add_argument("--iterations", type=int, default=None,
                          help="new total iteration budget")

    p_gen = sub.add_parser("gen", help="emit trial field and boundary data only")
    _add_common(p_gen)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = parse_config(args.config, _collect_overrides(args))
            manifest = run_experiment(cfg, args.out)
            print(json.dumps({"mean_abs": manifest["error"]["mean_abs"],
                              "acceptance_rate": manifest["acceptance"]["rate"],
                              "out": str(args.out)}))
        elif args.command == "sweep":
            cfg = parse_config(args.config, _collect_overrides(args))
            manifests = sweep(cfg, args.vary, args.out, jobs=args.jobs)
            print(json.dumps({"completed": len(manifests), "out": str(args.out)}))
        elif args.command == "resume":
            manifest = resume_experiment(args.out, iterations=args.iterations)
            print(json.dumps({"iterations": manifest["iterations"], "out": str(args.out)}))
        elif args.command == "gen":
            cfg = parse_config(args.config, _collect_overrides(args))
            checksums = generate_only(cfg, args.out)
            print(json.dumps(checksums))
        return EXIT_OK
    except (ConfigError, ValueError) as exc:
        print(json.dumps({"error": "validation", "message": str(exc)}), file=sys.stderr)
        return EXIT_VALIDATION
    except (ChainError, SolverError) as exc:
        print(json.dumps({"error": "runtime", "message": str(exc)}), file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc)}), file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
