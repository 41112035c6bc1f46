"""Command line entry point: ``pinlab <suite> --config <path> [--out DIR] [--workers N] [--seed S]``.

Exit status: 0 when every check passes, 1 on a check failure, 2 on usage,
configuration or output errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numba
import numpy as np
import scipy

from . import __version__
from .config import SUITES, ConfigError, ExperimentConfig, default_config, render_config, validate_config
from .errors import PinlabError
from .suites import run_suite

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pinlab", description="Disordered pinning model laboratory")
    p.add_argument("suite", choices=SUITES + ("validate",), help="suite to run, or 'validate' to echo the config")
    p.add_argument("--config", type=Path, help="INI configuration file")
    p.add_argument("--out", type=Path, help="output directory (overrides PINLAB_OUT and the config)")
    p.add_argument("--workers", type=int, help="worker processes for disorder samples")
    p.add_argument("--seed", type=int, help="master seed (overrides [batch] master_seed)")
    p.add_argument("--quiet", action="store_true", help="only print the final status")
    return p


def _resolve(args) -> ExperimentConfig:
    suite = None if args.suite == "validate" else args.suite
    if args.config is not None:
        cfg = validate_config(args.config, suite)
    else:
        cfg = default_config(suite or "homogeneous")
    changes = {}
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(["--seed: must be >= 0"])
        changes["batch"] = dataclasses.replace(cfg.batch, master_seed=args.seed)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError(["--workers: must be >= 1"])
        changes["workers"] = args.workers
    env_out = os.environ.get("PINLAB_OUT")
    if args.out is not None:
        changes["out"] = str(args.out)
    elif env_out:
        changes["out"] = env_out
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _versions() -> dict:
    return {
        "pinlab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.suite == "validate":
        sys.stdout.write(render_config(cfg))
        return EXIT_OK

    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".pinlab_write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory {out} is not writable: {exc}", file=sys.stderr)
        return EXIT_USAGE

    log = (lambda s: None) if args.quiet else (lambda s: print(s, flush=True))
    for note in cfg.notes:
        log(f"note: {note}")
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    try:
        result = run_suite(cfg, log)
    except PinlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    wall = time.perf_counter() - t0

    csv_path = out / f"{cfg.suite}.csv"
    meta = {
        "suite": cfg.suite,
        "started": started.isoformat(),
        "wall_time_s": wall,
        "config_hash": cfg.config_hash(),
        "config": json.loads(cfg.resolved_json()),
        "versions": _versions(),
        "csv": csv_path.name,
        "rows": len(result.rows),
        "checks_total": len(result.checks),
        "checks_failed": [name for name, ok, _ in result.checks if not ok],
        "passed": result.passed,
    }
    try:
        csv_path.write_text(result.csv_text(), encoding="utf-8")
        with open(out / "metadata.jsonl", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(meta, sort_keys=True) + "\n")
    except OSError as exc:
        print(f"error: cannot write results to {out}: {exc}", file=sys.stderr)
        return EXIT_USAGE

    failed = meta["checks_failed"]
    print(f"{cfg.suite}: {len(result.rows)} rows -> {csv_path}; "
          f"{len(result.checks) - len(failed)}/{len(result.checks)} checks passed in {wall:.1f} s")
    for name in failed:
        print(f"  failed: {name}")
    return EXIT_OK if result.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
