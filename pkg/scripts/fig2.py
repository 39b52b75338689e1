"""Accuracy vs number of frames F for all four access methods at 5 dB, load 0.5."""

from _common import run_grid

if __name__ == "__main__":
    import sys

    run_grid("fig2_frames.json", "fig2_frames.csv", 300, sys.argv[1:])
