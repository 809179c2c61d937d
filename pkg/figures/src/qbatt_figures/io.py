"""Schema-checked readers for the simulation output files."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

SCHEMA_TAG = "# qbatt-schema v1"


class SchemaMismatch(Exception):
    """Input file does not carry the expected schema or columns."""


def read_table(path, required=()) -> dict[str, np.ndarray]:
    """Load one schema-tagged CSV into named float columns.

    Empty fields become NaN. Missing required columns raise a
    SchemaMismatch naming every absent column.
    """
    if not os.path.exists(path):
        raise SchemaMismatch(f"{path}: file not found")
    with open(path, newline="") as fh:
        tag = fh.readline().strip()
        if tag != SCHEMA_TAG:
            raise SchemaMismatch(
                f"{path}: expected schema line {SCHEMA_TAG!r}, got {tag!r}"
            )
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: missing header row") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaMismatch(
                f"{path}: missing column(s) {', '.join(missing)}"
            )
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaMismatch(f"{path}: no data rows")
    data = np.full((len(rows), len(header)), np.nan)
    for i, row in enumerate(rows):
        for j, cell in enumerate(row):
            if cell != "":
                data[i, j] = float(cell)
    return {name: data[:, j] for j, name in enumerate(header)}


def read_json(path) -> dict:
    if not os.path.exists(path):
        raise SchemaMismatch(f"{path}: file not found")
    with open(path) as fh:
        return json.load(fh)


def find_traces(in_dir, kind: str) -> list[tuple[int, str]]:
    """(n, path) pairs for trace_N{n}_{kind}.csv files, ascending in n."""
    out = []
    for name in os.listdir(in_dir):
        if name.startswith("trace_N") and name.endswith(f"_{kind}.csv"):
            n = int(name[len("trace_N"):].split("_")[0])
            out.append((n, os.path.join(in_dir, name)))
    return sorted(out)


def find_entropy_tables(in_dir) -> list[tuple[int, str, str]]:
    """(n, kind, path) for entropy_N{n}_{kind}.csv files."""
    out = []
    for name in os.listdir(in_dir):
        if name.startswith("entropy_N") and name.endswith(".csv"):
            stem = name[len("entropy_N"):-len(".csv")]
            n_str, kind = stem.split("_", 1)
            out.append((int(n_str), kind, os.path.join(in_dir, name)))
    return sorted(out)
