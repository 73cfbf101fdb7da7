"""Deterministic JSON certificates.

Endpoints are serialized as 17-significant-digit decimal strings so the
archival artifact is unambiguous about binary floats; keys are sorted and
the byte stream is reproducible for identical config and tool version.
Wall-clock time goes to the run log, never into the certificate.
"""

from __future__ import annotations

import json

from . import __version__


def _canon(obj):
    if isinstance(obj, float):
        return f"{obj:.17g}"
    if isinstance(obj, dict):
        return {k: _canon(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canon(x) for x in obj]
    if hasattr(obj, "tolist"):
        return _canon(obj.tolist())
    return obj


def certificate_bytes(kind: str, config_echo: dict, stages: dict,
                      overall_pass: bool) -> bytes:
    doc = {
        "tool": {"name": "kscert", "version": __version__},
        "kind": kind,
        "config": _canon(config_echo),
        "stages": _canon(stages),
        "pass": bool(overall_pass),
    }
    return (json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=True)
            + "\n").encode("ascii")


def write_certificate(path, kind, config_echo, stages, overall_pass) -> bool:
    data = certificate_bytes(kind, config_echo, stages, overall_pass)
    with open(path, "wb") as fh:
        fh.write(data)
    return overall_pass
