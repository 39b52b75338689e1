"""Write the constellation reference table and the 15-class table at a few SNRs."""

import argparse
from pathlib import Path

from chanaccess.harness import table_csv

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--out", default=str(ROOT / "results"))
    out = Path(p.parse_args().out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "table1.csv").write_text(table_csv())
    for snr in (0, 10, 20):
        (out / f"classes_{snr}db.csv").write_text(table_csv(classes=True, snr_db=snr, j=500))
    print(f"wrote tables to {out}")
