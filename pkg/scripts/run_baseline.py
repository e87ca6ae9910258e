#!/usr/bin/env python3
"""Run the baseline scenario and print the per-order power and variance table."""

import pathlib
import sys

from uvnlos.cli import main

ROOT = pathlib.Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    args = ["scenario", "--config", str(ROOT / "configs" / "baseline.cfg")]
    sys.exit(main(args + sys.argv[1:]))
