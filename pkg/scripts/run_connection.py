#!/usr/bin/env python3
"""Run a heteroclinic-connection certificate (default mu = 0.75)."""
import pathlib
import sys

from kscert.cli import main

name = sys.argv[1] if len(sys.argv) > 1 else "conn_mu075"
root = pathlib.Path(__file__).resolve().parent.parent
out = root / "out" / name
code = main(["--config", str(root / "configs" / f"{name}.toml"),
             "--out", str(out)])
print(f"{name}: exit {code}  ({out}/certificate.json)")
sys.exit(code)
