"""Output files with a provenance header block."""
from __future__ import annotations

import csv
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

__all__ = ["config_hash", "header", "write_json", "write_csv", "jsonable"]


def jsonable(obj):
    """Recursively turn complex numbers, numpy scalars and arrays into JSON-friendly values."""
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and obj != obj:
        return None
    return obj


def config_hash(config: dict) -> str:
    blob = json.dumps(jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def header(config: dict, kind: str, provenance: dict | None = None) -> dict:
    return {"kind": kind, "config_hash": config_hash(config), "version": __version__,
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "provenance": provenance or {}}


def write_json(path: Path, payload: dict, config: dict, kind: str, provenance: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"header": header(config, kind, provenance), **jsonable(payload)}
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    return path


def write_csv(path: Path, columns, rows, config: dict, kind: str, provenance: dict | None = None) -> Path:
    """CSV preceded by ``# key: value`` header lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for k, v in header(config, kind, provenance).items():
            fh.write(f"# {k}: {json.dumps(v, sort_keys=True)}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return path
