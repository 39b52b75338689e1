"""Command-line entry point: ``python -m chanaccess <command>``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigurationError, InsufficientDataError
from .harness import classify_capture, export_corpus, parse_grid, rows_to_csv, run_trials, sweep, table_csv
from .netsim import ScenarioConfig

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_INSUFFICIENT = 3


def _load_json(path) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON document (scenario fields, or {'base', 'axes'} for sweep)")
    p.add_argument("--seed", type=int, default=None, help="master seed (default: config seed or 0)")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--out", default=None, help="output file or directory (default: stdout)")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chanaccess", description="Blind channel access method classification.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table", help="analytic C42 table as CSV")
    _common(p)
    p.add_argument("--classes", action="store_true", help="emit the 15-class table instead of the reference rows")
    p.add_argument("--snr-db", type=float, default=float("inf"))
    p.add_argument("--j", type=int, default=1, help="report J times the variance at this frame length")

    p = sub.add_parser("sweep", help="Monte Carlo grid run to CSV")
    _common(p)

    p = sub.add_parser("classify", help="classify one exported capture, JSON to stdout")
    _common(p)
    p.add_argument("capture")
    p.add_argument("--noise-variance", type=float, default=None, help="override the sidecar value")

    p = sub.add_parser("export", help="write a labelled capture corpus")
    _common(p)
    p.add_argument("--per-class", type=int, default=1)
    p.add_argument("--methods", default="TDMA,OFDMA,CDMA,CONTENTION")

    p = sub.add_parser("trials", help="accuracy record for one scenario as JSON")
    _common(p)
    p.add_argument("--average", action="store_true", help="cycle over the method's class modulations")
    return ap


def _cmd_table(a) -> int:
    _emit(table_csv(classes=a.classes, snr_db=a.snr_db, j=a.j), a.out)
    return EXIT_OK


def _cmd_sweep(a) -> int:
    grid = parse_grid(_load_json(a.config))
    seed = a.seed if a.seed is not None else grid.base.seed
    rows = sweep(grid, a.trials, seed, a.workers, progress=lambda r: print(json.dumps(r), file=sys.stderr))
    _emit(rows_to_csv(rows), a.out)
    return EXIT_OK


def _cmd_classify(a) -> int:
    cfg = _load_json(a.config)
    try:
        res = classify_capture(a.capture, a.noise_variance, cfg.get("j"), cfg.get("f"))
    except InsufficientDataError as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    _emit(json.dumps(res.to_dict(), indent=2) + "\n", a.out)
    return EXIT_OK


def _cmd_export(a) -> int:
    base = ScenarioConfig.from_dict(_load_json(a.config))
    seed = a.seed if a.seed is not None else base.seed
    paths = export_corpus(base, a.out or "captures", a.per_class, seed, tuple(m.strip().upper() for m in a.methods.split(",")))
    print(f"wrote {len(paths)} captures to {a.out or 'captures'}", file=sys.stderr)
    return EXIT_OK


def _cmd_trials(a) -> int:
    cfg = ScenarioConfig.from_dict(_load_json(a.config))
    seed = a.seed if a.seed is not None else cfg.seed
    rec = run_trials(cfg, a.trials, seed, a.workers, a.average)
    _emit(json.dumps(rec.to_dict(), indent=2) + "\n", a.out)
    return EXIT_OK


COMMANDS = {"table": _cmd_table, "sweep": _cmd_sweep, "classify": _cmd_classify, "export": _cmd_export, "trials": _cmd_trials}


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    if getattr(a, "trials", 1) < 1 or getattr(a, "workers", 1) < 1:
        print("error: --trials and --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[a.command](a)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
