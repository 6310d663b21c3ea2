"""Command-line front end: ``reachavoid {solve,converge,benchmark,simulate,contour}``.

Every run is driven by one JSON config validated against ``CONFIG_SCHEMA``
before any compute. Exit codes: 0 success, 1 threshold failure, 2 config
or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import jsonschema

from .analysis import (
    augmentation_benchmark,
    convergence_study,
    extract_zero_contour,
    write_contour_csv,
)
from .games import builtin_problem, problem_from_dict
from .grid import GridError, read_field, write_field
from .numerics import NumericalError
from .solver import SolveConfig, SolveResult, solve_backward
from .strategy import monte_carlo, write_trajectory_csv

log = logging.getLogger("reachavoid")

EXIT_OK, EXIT_THRESHOLD, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
CONFIG_VERSION = 1
DEFAULT_FRAMES = {"example1": [0.5, 0.45, 0.3, 0.1, 0.05, 0.0]}
DEFAULT_NS = [51, 101, 151, 201, 251, 301]
QUICK_NS = [51, 101]

_counts = {"oneOf": [{"type": "integer", "minimum": 1},
                     {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1, "maxItems": 4}]}
_times = {"type": "array", "items": {"type": "number"}, "minItems": 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["version"],
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "builtin": {"enum": ["example1", "example2"]},
                "overrides": {"type": "object"},
                "inline": {"type": "object"},
            },
            "oneOf": [{"required": ["builtin"], "not": {"required": ["inline"]}},
                      {"required": ["inline"], "not": {"anyOf": [{"required": ["builtin"]},
                                                                {"required": ["overrides"]}]}}],
        },
        "grid": {"type": "object", "additionalProperties": False, "required": ["counts"],
                 "properties": {"counts": _counts}},
        "frames": {"type": "object", "additionalProperties": False,
                   "properties": {"times": _times, "count": {"type": "integer", "minimum": 2}},
                   "oneOf": [{"required": ["times"]}, {"required": ["count"]}]},
        "scheme": {"enum": ["high", "low"]},
        "cfl_factor": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "mode": {"enum": ["reach_avoid", "reach_only"]},
        "output": {"type": "string"},
        "seed": {"type": "integer"},
        "converge": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "Ns": {"type": "array", "items": {"type": "integer", "minimum": 7}, "minItems": 1},
                "n_points": {"type": "integer", "minimum": 10},
                "mean_tol": {"type": "number", "exclusiveMinimum": 0},
                "max_tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "benchmark": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "native_counts": _counts,
                "augmented_counts": _counts,
                "times": _times,
                "slice_axis": {"type": ["integer", "null"], "minimum": 0},
                "positions": {"type": "array", "items": {"type": "number"}},
                "min_speedup": {"type": "number"},
                "max_cells": {"type": "number"},
            },
        },
        "simulate": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "solve_dir": {"type": "string"},
                "n_starts": {"type": "integer", "minimum": 1},
                "margin_cells": {"type": "number", "minimum": 0},
                "t0": {"type": "number", "minimum": 0},
                "trajectories": {"type": "boolean"},
            },
        },
    },
}


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


def load_config(path: str | Path) -> dict:
    """Read and validate a config file; raises :class:`ConfigError`."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {path}: {where}: {exc.message}") from exc
    return data


def problem_from_config(cfg: dict):
    if "problem" not in cfg:
        raise ConfigError("config has no 'problem' section")
    prob = cfg["problem"]
    try:
        if "inline" in prob:
            return problem_from_dict(prob["inline"])
        return builtin_problem(prob["builtin"], prob.get("overrides"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad problem description: {exc}") from exc


def solve_config_from(cfg: dict, spec) -> SolveConfig:
    frames = cfg.get("frames")
    extra = {k: cfg[k] for k in ("scheme", "cfl_factor", "mode") if k in cfg}
    try:
        if frames is None:
            times = DEFAULT_FRAMES.get(cfg["problem"].get("builtin"), [spec.horizon, 0.0])
            return SolveConfig(spec.horizon, tuple(times), **extra)
        if "count" in frames:
            return SolveConfig.uniform(spec.horizon, frames["count"], **extra)
        return SolveConfig(spec.horizon, tuple(frames["times"]), **extra)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _grid(spec, counts):
    try:
        return spec.grid(counts)
    except GridError as exc:
        raise ConfigError(f"bad grid: {exc}") from exc


def _out_dir(args, cfg, default: str) -> Path:
    out = Path(args.out or cfg.get("output") or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data):
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


# --- solve output on disk ----------------------------------------------------

def write_solve_output(out: Path, spec, result: SolveResult, cfg: dict | None = None) -> dict:
    """Write one HJRA file per frame and ``manifest.json``; returns the manifest."""
    t0 = time.perf_counter()
    files = []
    for k, (t, fld) in enumerate(result.frames):
        name = f"frame_{k:03d}.hjra"
        write_field(out / name, fld)
        files.append({"time": t, "file": name})
    io = time.perf_counter() - t0
    manifest = {
        "version": CONFIG_VERSION,
        "problem": spec.to_dict(),
        "config": cfg,
        "solve": result.config.to_dict(),
        "model_id": result.model_id,
        "grid": {"counts": list(result.grid.counts), "mins": list(result.grid.mins), "maxs": list(result.grid.maxs)},
        "frame_times": [t for t, _ in result.frames],
        "files": files,
        "wall_time": {**result.timings, "io": io},
        "cfl_history": [[tau, dt] for tau, dt in result.steps],
    }
    _write_json(out / "manifest.json", manifest)
    return manifest


def load_solve_output(directory: str | Path):
    """Rebuild ``(problem, SolveResult)`` from a solve output directory."""
    directory = Path(directory)
    mpath = directory / "manifest.json"
    if not mpath.is_file():
        raise ConfigError(f"no solve output at {directory} (missing manifest.json)")
    try:
        manifest = json.loads(mpath.read_text())
        spec = problem_from_dict(manifest["problem"])
        frames = []
        for entry in manifest["files"]:
            fld = read_field(directory / entry["file"])
            frames.append((float(entry["time"]), fld))
        s = manifest["solve"]
        config = SolveConfig(s["horizon"], tuple(s["frame_times"]), s["cfl_factor"], s["scheme"], s["mode"])
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"unreadable solve output in {directory}: {exc}") from exc
    result = SolveResult(frames, manifest["model_id"], frames[0][1].grid, config,
                         dict(manifest["wall_time"]), [tuple(s) for s in manifest["cfl_history"]])
    return spec, result


# --- subcommands -------------------------------------------------------------

def cmd_solve(args, cfg) -> int:
    spec = problem_from_config(cfg)
    counts = cfg.get("grid", {}).get("counts", 51)
    grid = _grid(spec, counts)
    config = solve_config_from(cfg, spec)
    out = _out_dir(args, cfg, "out/solve")
    result = solve_backward(spec.model, spec.l_scene, spec.g_scene, grid, config)
    manifest = write_solve_output(out, spec, result, cfg)
    wt = manifest["wall_time"]
    print(f"solved {spec.name} on {list(grid.counts)}: {len(result.steps)} steps, "
          f"stepping {wt['stepping']:.2f}s, io {wt['io']:.2f}s -> {out}")
    return EXIT_OK


def cmd_converge(args, cfg) -> int:
    spec = problem_from_config(cfg)
    if spec.name != "example1":
        raise ConfigError("converge needs the example1 problem (the analytic boundary is only known there)")
    sect = cfg.get("converge", {})
    Ns = QUICK_NS if args.quick else sect.get("Ns", DEFAULT_NS)
    mean_tol, max_tol = sect.get("mean_tol", 0.2), sect.get("max_tol", 0.8)
    out = _out_dir(args, cfg, "out/converge")
    extra = {k: cfg[k] for k in ("scheme", "cfl_factor", "mode") if k in cfg}
    reports = convergence_study(spec, Ns, extra, sect.get("n_points", 20000), out / "convergence.csv")
    status = EXIT_OK
    prev = None
    for n, rep in zip(Ns, reports):
        h = rep.grid_spacing
        ok = rep.mean_error <= mean_tol * h and rep.max_error <= max_tol * h
        if prev is not None and rep.mean_error >= prev:
            ok = False
        prev = rep.mean_error
        line = (f"N={n} spacing={h:.6g} mean={rep.mean_error:.4g} ({rep.mean_error / h:.3f} h) "
                f"max={rep.max_error:.4g} ({rep.max_error / h:.3f} h)")
        print(("PASS " if ok else "FAIL ") + line)
        if not ok:
            status = EXIT_THRESHOLD
    return status


BENCH_DEFAULTS = {"native_counts": 41, "augmented_counts": 35, "times": [0.0], "slice_axis": 2,
                  "positions": [-0.75, -0.25, 0.25, 0.75], "min_speedup": 10.0, "max_cells": 1.5}
BENCH_QUICK = {"native_counts": 21, "augmented_counts": 15}


def cmd_benchmark(args, cfg) -> int:
    spec = problem_from_config(cfg)
    sect = {**BENCH_DEFAULTS, **cfg.get("benchmark", {})}
    if args.quick:
        sect.update(BENCH_QUICK)
    if spec.ndim == 2 and "slice_axis" not in cfg.get("benchmark", {}):
        sect["slice_axis"] = None
    out = _out_dir(args, cfg, "out/benchmark")
    extra = {k: cfg[k] for k in ("scheme", "cfl_factor") if k in cfg}
    try:
        report = augmentation_benchmark(spec, sect["native_counts"], sect["augmented_counts"], sect["times"],
                                        sect["slice_axis"], sect["positions"], **extra)
    except GridError as exc:
        raise ConfigError(f"bad benchmark grid: {exc}") from exc
    data = report.to_dict()
    data.update(thresholds={"min_speedup": sect["min_speedup"], "max_cells": sect["max_cells"]})
    _write_json(out / "benchmark.json", data)
    print(f"native {report.native_counts}: {sum(report.native_timings.values()):.2f}s  "
          f"augmented {report.augmented_counts}: {sum(report.augmented_timings.values()):.2f}s  "
          f"speedup {report.speedup:.1f}x")
    for t, pos, d in report.comparisons:
        where = "" if pos is None else f" slice={pos:g}"
        print(f"  t={t:g}{where}: hausdorff {d:.4g} ({d / report.cell:.2f} cells)")
    ok_speed = report.speedup >= sect["min_speedup"]
    ok_cells = report.worst_cells <= sect["max_cells"]
    print(f"{'PASS' if ok_speed else 'FAIL'} speedup >= {sect['min_speedup']:g}")
    print(f"{'PASS' if ok_cells else 'FAIL'} agreement <= {sect['max_cells']:g} cells")
    return EXIT_OK if ok_speed and ok_cells else EXIT_THRESHOLD


def cmd_simulate(args, cfg) -> int:
    sect = cfg.get("simulate", {})
    solve_dir = sect.get("solve_dir")
    if solve_dir is None:
        raise ConfigError("simulate needs simulate.solve_dir pointing at a solve output")
    spec, result = load_solve_output(solve_dir)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    n = sect.get("n_starts", 20 if args.quick else 100)
    margin = sect.get("margin_cells", 2.0) * max(result.grid.spacing)
    t0 = sect.get("t0", 0.0)
    out = _out_dir(args, cfg, "out/simulate")
    summary = {"seed": seed, "n_starts": n, "margin": margin, "t0": t0, "solve_dir": str(solve_dir), "groups": {}}
    for k, (label, inside) in enumerate((("inside", True), ("outside", False))):
        try:
            run = monte_carlo(spec, result, n, margin, inside, seed + k, t0)
        except RuntimeError as exc:
            print(f"{label}: skipped ({exc})")
            summary["groups"][label] = {"n": 0, "skipped": str(exc)}
            continue
        outcomes = {}
        for tr in run.trajectories:
            outcomes[tr.outcome] = outcomes.get(tr.outcome, 0) + 1
        summary["groups"][label] = {"n": len(run.trajectories), "win_rate": run.win_rate, "outcomes": outcomes,
                                    "starts": run.starts.tolist(), "values": run.values.tolist()}
        if sect.get("trajectories", True):
            tdir = out / "trajectories"
            tdir.mkdir(exist_ok=True)
            for j, tr in enumerate(run.trajectories):
                write_trajectory_csv(tdir / f"{label}_{j:03d}.csv", tr)
        print(f"{label} (V {'<=' if inside else '>='} {'-' if inside else '+'}{margin:.4g}): "
              f"win rate {run.win_rate:.3f} over {len(run.trajectories)} starts {outcomes}")
    _write_json(out / "summary.json", summary)
    return EXIT_OK


def cmd_contour(args) -> int:
    try:
        fld = read_field(args.frame)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read frame {args.frame}: {exc}") from exc
    if fld.grid.ndim != 2:
        raise ConfigError(f"contour needs a 2D frame, {args.frame} has {fld.grid.ndim} dimensions")
    contour = extract_zero_contour(fld, args.level)
    out = Path(args.out) if args.out else Path(args.frame).parent
    out.mkdir(parents=True, exist_ok=True)
    path = out / (Path(args.frame).stem + "_contour.csv")
    write_contour_csv(path, contour)
    print(f"{len(contour)} segments at level {args.level:g} -> {path}")
    return EXIT_OK


def _set_threads(n: int | None):
    if n is None:
        return
    try:
        import numba

        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    except ImportError:  # pragma: no cover
        pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="cap on compiled-kernel threads")
    common.add_argument("--seed", type=int, help="seed for Monte-Carlo subcommands")
    common.add_argument("--quick", action="store_true", help="reduced problem sizes")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="reachavoid", description="Reach-avoid games with moving targets and obstacles")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("solve", "solve a problem and write frames"),
                       ("converge", "boundary-error convergence study"),
                       ("benchmark", "native versus time-augmented solve"),
                       ("simulate", "closed-loop Monte-Carlo from a stored solve")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("config", help="JSON config file")
    p = sub.add_parser("contour", parents=[common], help="zero contour of a 2D frame file")
    p.add_argument("frame", help="HJRA frame file")
    p.add_argument("--level", type=float, default=0.0)
    return parser


COMMANDS = {"solve": cmd_solve, "converge": cmd_converge, "benchmark": cmd_benchmark, "simulate": cmd_simulate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    _set_threads(args.threads)
    try:
        if args.command == "contour":
            return cmd_contour(args)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
