"""Command line: single runs, experiment matrices and config validation.

Exit codes: 0 success, 2 validation error, 3 IO error, 4 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import RunConfig, from_dict, load_config, parse_override
from .engine import RoundReport, run_experiment
from .errors import ConfigError

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_RUNTIME = 0, 2, 3, 4

# axis names accepted in a matrix file, with the config key each one sets
MATRIX_AXES = {
    "attack": "attack",
    "defense": "defense",
    "epsilon": "epsilon",
    "num_vehicles": "num_vehicles",
    "tx_range": "tx_range_m",
    "tx_range_m": "tx_range_m",
    "hop_limit": "hop_limit",
    "seed": "seed",
}
SUMMARY_COLUMNS = ("convergence_round", "final_accuracy", "rounds_run", "benign_false_block_rate", "status")


def parse_config(path=None, overrides=(), seed: int | None = None) -> RunConfig:
    """File values, then ``key=value`` overrides, then ``--seed``."""
    pairs = dict(parse_override(item) for item in overrides)
    if seed is not None:
        pairs["seed"] = seed
    return load_config(path, pairs)


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def emit_reports(reports: list[RoundReport], summary: dict, cfg: RunConfig, out_dir) -> Path:
    """Write ``rounds.jsonl``, ``summary.json`` and ``accuracy.csv`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "rounds.jsonl", "w", newline="\n") as fh:
        for r in reports:
            fh.write(_dumps(r.to_record()) + "\n")
    with open(out / "summary.json", "w", newline="\n") as fh:
        json.dump({**summary, "config": cfg.to_dict()}, fh, indent=2, allow_nan=False)
        fh.write("\n")
    with open(out / "accuracy.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "accuracy"])
        for r in reports:
            w.writerow([r.round, repr(r.global_accuracy)])
    return out


def read_axes(path) -> dict[str, list]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict) or not data:
        raise ConfigError("axes must be a non-empty JSON object of name -> list")
    axes = {}
    for name, values in data.items():
        if name not in MATRIX_AXES:
            raise ConfigError(f"unknown matrix axis {name!r}; allowed: {', '.join(sorted(MATRIX_AXES))}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"axis {name!r} must be a non-empty list")
        axes[name] = values
    return axes


def matrix_cells(axes: dict[str, list]) -> list[dict]:
    names = list(axes)
    return [dict(zip(names, combo)) for combo in itertools.product(*(axes[n] for n in names))]


def _run_cell(job: tuple[int, dict, dict, str]) -> dict:
    index, base, cell, out_root = job
    row = {"run": f"run_{index:04d}", **cell}
    try:
        cfg = from_dict({**base, **{MATRIX_AXES[k]: v for k, v in cell.items()}})
        reports, summary = run_experiment(cfg)
        emit_reports(reports, summary, cfg, Path(out_root) / row["run"])
    except Exception as exc:  # one failed cell must not abort the matrix
        return {**row, **{c: "" for c in SUMMARY_COLUMNS}, "status": f"error: {type(exc).__name__}: {exc}"}
    return {**row, "convergence_round": summary["convergence_round"],
            "final_accuracy": summary["final_accuracy"], "rounds_run": summary["rounds_run"],
            "benign_false_block_rate": summary["benign_false_block_rate"], "status": "ok"}


def run_matrix(base: RunConfig, axes: dict[str, list], out_dir, jobs: int = 1) -> list[dict]:
    """Cartesian product of ``axes`` over ``base``; one subdirectory per run plus ``matrix_summary.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    work = [(i, base.to_dict(), cell, str(out)) for i, cell in enumerate(matrix_cells(axes))]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell, work))
    else:
        rows = [_run_cell(w) for w in work]
    with open(out / "matrix_summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["run", *axes, *SUMMARY_COLUMNS], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return rows


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="darcs", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", default="out", help="output directory (default: ./out)")
    run.add_argument("overrides", nargs="*", metavar="key=value")

    mat = sub.add_parser("matrix", help="run the cartesian product of experiment axes")
    mat.add_argument("--config", required=True)
    mat.add_argument("--axes", required=True, help="JSON object mapping axis name to a list of values")
    mat.add_argument("--out", required=True)
    mat.add_argument("--jobs", type=int, default=1)

    val = sub.add_parser("validate", help="check a config file and print the effective config")
    val.add_argument("--config", required=True)
    return p


def _dispatch(args) -> int:
    if args.command == "validate":
        cfg = parse_config(args.config)
        print(json.dumps(cfg.to_dict(), indent=2))
        return EXIT_OK
    if args.command == "run":
        cfg = parse_config(args.config, args.overrides, args.seed)
        reports, summary = run_experiment(cfg)
        out = emit_reports(reports, summary, cfg, args.out)
        print(f"rounds={summary['rounds_run']} convergence_round={summary['convergence_round']} "
              f"final_accuracy={summary['final_accuracy']} out={out}")
        return EXIT_OK
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    base = parse_config(args.config)
    rows = run_matrix(base, read_axes(args.axes), args.out, args.jobs)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"runs={len(rows)} failed={failed} out={args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
