#!/usr/bin/env python3
"""Run both bifurcation certificates into out/."""
import pathlib
import sys

from kscert.cli import main

root = pathlib.Path(__file__).resolve().parent.parent
rc = 0
for name in ("bif_mu1", "bif_mu025"):
    out = root / "out" / name
    code = main(["--config", str(root / "configs" / f"{name}.toml"),
                 "--out", str(out)])
    print(f"{name}: exit {code}  ({out}/certificate.json)")
    rc = rc or code
sys.exit(rc)
