#!/usr/bin/env python3
"""Run the toy-model lemma suites."""
import pathlib
import sys

from kscert.cli import main

root = pathlib.Path(__file__).resolve().parent.parent
rc = 0
for name in ("toy_planar", "toy_unstable"):
    out = root / "out" / name
    code = main(["--config", str(root / "configs" / f"{name}.toml"),
                 "--out", str(out)])
    print(f"{name}: exit {code}")
    rc = rc or code
sys.exit(rc)
