"""Persistence of run records (JSON) and data tables (CSV)."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = ["canonical_json", "content_hash", "write_record", "write_table", "record_path", "table_path"]

FORMAT_VERSION = 1


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def canonical_json(obj: Any) -> str:
    """Deterministic JSON text: sorted keys, fixed indent, non-finite as strings."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def content_hash(obj: Any) -> str:
    """SHA-256 of the canonical JSON of ``obj``."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def record_path(out_dir, kind: str, seed: int) -> Path:
    return Path(out_dir) / f"{kind}_seed{seed}.json"


def table_path(out_dir, kind: str, seed: int, name: str) -> Path:
    return Path(out_dir) / f"{kind}_seed{seed}_{name}.csv"


def write_record(out_dir, kind: str, seed: int, config: dict, outputs: dict) -> Path:
    """Write ``{kind, seed, config, input_hash, outputs}`` as canonical JSON."""
    inputs = {"kind": kind, "seed": seed, "config": config}
    rec = dict(inputs, input_hash=content_hash(inputs), outputs=outputs,
               format_version=FORMAT_VERSION)
    path = record_path(out_dir, kind, seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(rec), encoding="utf-8")
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_table(out_dir, kind: str, seed: int, name: str, header: Sequence[str],
                rows: Iterable[Sequence]) -> Path:
    path = table_path(out_dir, kind, seed, name)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path
