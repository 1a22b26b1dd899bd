"""Command-line front end.

Exit codes: 0 success, 1 simulation aborted (geometry degeneracy),
2 configuration error, 3 invariant violation in strict mode, 4 missing or
unreadable file.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .config import BUNDLED, ConfigError, ScenarioConfig, load_config
from .sim import InvariantViolation, SimulationAborted, run, write_outputs

EXIT_OK, EXIT_ABORT, EXIT_CONFIG, EXIT_INVARIANT, EXIT_FILE = 0, 1, 2, 3, 4
SWEEP_KEYS = ("gamma", "sigma", "alpha", "omega0", "xi_max", "dt", "duration", "mode")
SWEEP_COLUMNS = ("H_V_final", "total_triggers", "message_count", "min_inter_event", "final_max_dist", "converged")

logger = logging.getLogger("cvt_sim")


@dataclass
class CliInvocation:
    config: str
    mode: str | None = None
    dt: float | None = None
    duration: float | None = None
    out: str = "out"
    strict: bool = False
    emit_trace: bool = True
    emit_messages: bool = True
    sweep: str | None = None
    overrides: dict = field(default_factory=dict)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cvt-sim", description="Event/self-triggered Voronoi coverage simulator")
    p.add_argument("--config", required=True,
                   help=f"scenario YAML path or bundled name ({', '.join(BUNDLED)})")
    p.add_argument("--mode", choices=("continuous", "event", "self"))
    p.add_argument("--dt", type=float)
    p.add_argument("--duration", type=float)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--strict", action="store_true", help="abort on invariant violations")
    p.add_argument("--no-trace", dest="emit_trace", action="store_false")
    p.add_argument("--no-messages", dest="emit_messages", action="store_false")
    p.add_argument("--sweep", help="YAML mapping of parameter -> list of values")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _configure(inv: CliInvocation) -> ScenarioConfig:
    cfg = load_config(inv.config)
    kw = dict(inv.overrides)
    kw.update(mode=inv.mode, dt=inv.dt, duration=inv.duration)
    if inv.strict:
        kw["strict"] = True
    return cfg.with_overrides(**kw)


def main_run(inv: CliInvocation) -> int:
    cfg = _configure(inv)
    logger.info("running %s (%s mode, %d robots, %d steps)", cfg.name, cfg.mode, cfg.n, cfg.n_steps)
    result = run(cfg)
    write_outputs(result, inv.out, emit_trace=inv.emit_trace, emit_messages=inv.emit_messages)
    s = result.summary
    print(f"{cfg.name} [{cfg.mode}] H_V {s['H_V_initial']:.6f} -> {s['H_V_final']:.6f}, "
          f"max|z-C| {s['final_max_dist']:.3e}, triggers {s['total_triggers']}, converged={s['converged']}")
    return EXIT_OK


def load_sweep(path: str) -> list[dict]:
    spec = yaml.safe_load(Path(path).read_text())
    if isinstance(spec, dict) and "grid" in spec:
        spec = spec["grid"]
    if not isinstance(spec, dict) or not spec:
        raise ConfigError("sweep spec must be a non-empty mapping of parameter -> values")
    for key, values in spec.items():
        if key not in SWEEP_KEYS:
            raise ConfigError(f"cannot sweep over {key!r}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep values for {key!r} must be a non-empty list")
    keys = list(spec)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(spec[k] for k in keys))]


def _sweep_point(args) -> dict:
    cfg, point = args
    s = run(cfg.with_overrides(**point)).summary
    return {**point, **{c: s[c] for c in SWEEP_COLUMNS}}


def main_sweep(inv: CliInvocation) -> int:
    grid = load_sweep(inv.sweep)
    cfg = _configure(inv)
    for point in grid:  # validate every point before running any
        cfg.with_overrides(**point)
    workers = max(1, min(int(os.environ.get("CVT_SIM_THREADS", os.cpu_count() or 1)), len(grid)))
    jobs = [(cfg, p) for p in grid]
    if workers == 1:
        rows = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_point, jobs))
    out = Path(inv.out)
    out.mkdir(parents=True, exist_ok=True)
    cols = list(grid[0]) + list(SWEEP_COLUMNS)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (json.dumps(v) if isinstance(v, list) else v) for k, v in row.items()})
    print(f"wrote {len(rows)} sweep rows to {out / 'sweep.csv'}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    inv = CliInvocation(config=args.config, mode=args.mode, dt=args.dt, duration=args.duration,
                        out=args.out, strict=args.strict, emit_trace=args.emit_trace,
                        emit_messages=args.emit_messages, sweep=args.sweep)
    try:
        return main_sweep(inv) if inv.sweep else main_run(inv)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: cannot read {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_FILE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except SimulationAborted as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
