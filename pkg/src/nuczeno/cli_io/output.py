"""Result files: '#'-prefixed metadata followed by CSV columns, or one JSON document."""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import RESULT_MARKER, SCHEMA_VERSION


@dataclass
class ResultTable:
    command: str
    columns: list
    data: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(self.data[c]) for c in self.columns}
        if len(lengths) > 1:
            raise ValueError("columns have different lengths")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return repr(x)
    return format(x, ".17g")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def header(table: ResultTable, version: str) -> dict:
    meta = {"schema_version": SCHEMA_VERSION, "command": table.command, "code_version": version}
    meta.update(table.metadata)
    return _jsonable(meta)


def to_csv(table: ResultTable, version: str) -> str:
    meta = header(table, version)
    buf = io.StringIO()
    buf.write(RESULT_MARKER + "\n")
    for key in ("schema_version", "command", "code_version", "seed"):
        if key in meta:
            buf.write(f"# {key}: {meta[key]}\n")
    if "config" in meta:
        buf.write("# config: " + json.dumps(meta["config"], sort_keys=True, separators=(",", ":")) + "\n")
    rest = {k: v for k, v in meta.items() if k not in ("schema_version", "command", "code_version", "seed", "config")}
    if rest:
        buf.write("# meta: " + json.dumps(rest, sort_keys=True, separators=(",", ":")) + "\n")
    buf.write(",".join(table.columns) + "\n")
    n = len(table.data[table.columns[0]]) if table.columns else 0
    for i in range(n):
        buf.write(",".join(_fmt(table.data[c][i]) for c in table.columns) + "\n")
    return buf.getvalue()


def to_json(table: ResultTable, version: str) -> str:
    doc = {
        "metadata": header(table, version),
        "columns": list(table.columns),
        "data": {c: _jsonable(list(table.data[c])) for c in table.columns},
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def render(table: ResultTable, fmt: str, version: str) -> str:
    if fmt == "csv":
        return to_csv(table, version)
    if fmt == "json":
        return to_json(table, version)
    raise ValueError(f"unknown output format {fmt!r}")


def read_csv(text: str):
    """Parse a CSV result back into ``(metadata, columns)``; columns are float arrays where possible."""
    meta = {}
    lines = text.splitlines()
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        line = lines[k][2:]
        if ": " in line:
            key, value = line.split(": ", 1)
            meta[key] = json.loads(value) if key in ("config", "meta") else value
        k += 1
    names = lines[k].split(",")
    rows = [ln.split(",") for ln in lines[k + 1 :] if ln]
    cols = {}
    for j, name in enumerate(names):
        vals = [r[j] for r in rows]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = np.array(vals)
    return meta, cols
