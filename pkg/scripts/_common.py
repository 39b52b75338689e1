import argparse
import json
import sys
from pathlib import Path

from chanaccess.harness import parse_grid, rows_to_csv, sweep

ROOT = Path(__file__).resolve().parent.parent


def run_grid(default_config: str, default_out: str, trials: int, argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--config", default=str(ROOT / "configs" / default_config))
    p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=str(ROOT / "results"), help="output directory")
    a = p.parse_args(argv)
    grid = parse_grid(json.loads(Path(a.config).read_text()))
    rows = sweep(grid, a.trials, a.seed, a.workers, progress=lambda row: print(json.dumps(row), file=sys.stderr))
    out = Path(a.out) / default_out
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(rows_to_csv(rows))
    print(f"wrote {len(rows)} rows to {out}")
