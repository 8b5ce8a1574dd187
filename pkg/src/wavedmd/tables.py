"""Flat tabular files (CSV) that round-trip through their own reader.

Floats are written with ``repr`` (shortest exact representation), booleans as
``true``/``false``; :func:`read_rows` restores int, float, and bool values.
"""

from __future__ import annotations

import csv


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _parse(text: str):
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_rows(path, rows: list[dict], fieldnames: list[str] | None = None) -> None:
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_format(row[k]) for k in fieldnames])


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return [{k: _parse(v) for k, v in zip(header, row)} for row in reader if row]
