"""Tabular results and their CSV / JSON serialisation.

Numbers are written with 9 significant digits. CSV comment rows start with
``#``; the first one is always the provenance header.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import sys
from dataclasses import dataclass, field
from numbers import Integral, Real

import numpy as np

SIG_DIGITS = 9


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, Integral):
        return str(int(x))
    if isinstance(x, Real):
        return f"{float(x):.{SIG_DIGITS}g}"
    return str(x)


def round_sig(obj):
    """Recursively round floats to ``SIG_DIGITS`` significant digits."""
    if isinstance(obj, dict):
        return {str(k): round_sig(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return round_sig(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, Integral):
        return int(obj)
    if isinstance(obj, Real):
        x = float(obj)
        return float(f"{x:.{SIG_DIGITS}g}") if np.isfinite(x) else None
    return obj


def config_hash(config: dict) -> str:
    text = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class Table:
    """Column data plus scalar metadata and free-form comment rows."""

    kind: str
    columns: dict  # name -> 1-D sequence, all equal length
    meta: dict = field(default_factory=dict)
    comments: list = field(default_factory=list)  # CSV-only "# ..." rows
    extra: dict = field(default_factory=dict)  # JSON-only structured payload

    @property
    def n_rows(self) -> int:
        lengths = {len(v) for v in self.columns.values()}
        return lengths.pop() if lengths else 0


def provenance_line(provenance: dict) -> str:
    return " ".join(f"{k}={provenance[k]}" for k in ("tool", "version", "command", "seed", "config_hash"))


def to_csv(table: Table, provenance: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# {provenance_line(provenance)}\n")
    for key, value in table.meta.items():
        buf.write(f"# {key}={fmt(value)}\n")
    for line in table.comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    names = list(table.columns)
    writer.writerow(names)
    cols = [table.columns[n] for n in names]
    for i in range(table.n_rows):
        writer.writerow([fmt(c[i]) for c in cols])
    return buf.getvalue()


def to_json(table: Table, provenance: dict) -> str:
    payload = {"provenance": provenance, "kind": table.kind}
    payload.update(table.meta)
    payload["columns"] = list(table.columns)
    payload["data"] = {k: list(v) for k, v in table.columns.items()}
    payload.update(table.extra)
    return json.dumps(round_sig(payload), indent=2, sort_keys=False) + "\n"


def emit(table: Table, fmt_name: str, destination, provenance: dict) -> None:
    """Write ``table`` to a path or stream (``None`` or ``"-"`` is stdout)."""
    if fmt_name == "csv":
        text = to_csv(table, provenance)
    elif fmt_name == "json":
        text = to_json(table, provenance)
    else:
        raise ValueError(f"unknown format {fmt_name!r}")
    if destination in (None, "-"):
        sys.stdout.write(text)
    elif hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def read_csv(text: str):
    """Parse emitted CSV into ``(comments, header, rows)`` of strings."""
    lines = text.splitlines()
    comments = [ln[1:].strip() for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    rows = list(csv.reader(body))
    return comments, rows[0], rows[1:]
