"""Line-oriented JSON records and CSV plot-data files.

Every ``.jsonl`` file starts with a header record carrying
``schema_version``; each later line is one object with a ``record`` field
naming its type.  Floats are written with ``repr`` precision so reading a
file back reproduces the numbers bit for bit.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .config import SCHEMA_VERSION


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def dumps(record: dict) -> str:
    return json.dumps(_clean(record), sort_keys=True, separators=(",", ":"), allow_nan=False)


def header(kind: str, **extra) -> dict:
    return {"record": "header", "schema_version": SCHEMA_VERSION, "tool": "termstruct",
            "version": __version__, "file": kind, **extra}


def render_jsonl(records: Iterable[dict]) -> str:
    return "".join(dumps(r) + "\n" for r in records)


def read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    if not records or records[0].get("record") != "header":
        raise ValueError(f"{path} has no header record")
    if records[0].get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema version {records[0].get('schema_version')}")
    return records[1:]


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def render_csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
