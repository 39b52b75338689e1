"""Accuracy vs SNR: TDMA (panel a) and contention at three loads (panel b)."""

from _common import run_grid

if __name__ == "__main__":
    import sys

    args = sys.argv[1:]
    run_grid("fig1a_tdma.json", "fig1a_tdma.csv", 500, args)
    run_grid("fig1b_contention.json", "fig1b_contention.csv", 500, args)
