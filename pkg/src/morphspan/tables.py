"""CSV/JSON interchange helpers.

Every CSV written by the toolkit starts with a ``# morphspan <version>``
comment line followed by a header row; readers skip comment lines.
Floats are written with repr-shortest formatting so identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json

from . import __version__
from .errors import FormatError

COMMENT_PREFIX = "#"


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header, rows):
    """Write rows (sequences or dicts) under ``header`` with the version
    comment line."""
    buf = io.StringIO()
    buf.write(f"# morphspan {__version__}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if isinstance(row, dict):
            row = [row.get(h) for h in header]
        writer.writerow([format_value(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path):
    """Read a CSV as a list of dicts, skipping comment lines."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith(COMMENT_PREFIX)]
    if not lines:
        raise FormatError(f"{path}: empty CSV")
    return list(csv.DictReader(lines))


def require_columns(rows, columns, path=""):
    if not rows:
        raise FormatError(f"{path}: no data rows")
    missing = [c for c in columns if c not in rows[0]]
    if missing:
        raise FormatError(f"{path}: missing column {missing[0]!r}")


def parse_float(value, default=None):
    if value is None or value == "":
        return default
    return float(value)


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
