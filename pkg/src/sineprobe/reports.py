"""Machine-readable experiment reports.

A report is a directory: ``config.json`` (exact echo, sufficient to re-run),
``labels.csv``, ``matrix.csv`` / ``neighbors.csv``, ``scale.csv``,
``projection.csv`` and ``summary.json``.  CSV is UTF-8 with a header row,
comma separators and full-precision decimal floats.  Files are written to a
temp name in the target directory and renamed, so readers never observe a
partial file.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np


def _csv_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def jsonable(value):
    """Recursively convert numpy scalars/arrays so json.dumps accepts them."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def write_json(path: str, payload) -> None:
    # allow_nan=False: a NaN in a report is a bug, undefined stats must be null
    atomic_write_text(path, json.dumps(jsonable(payload), indent=2, sort_keys=True, allow_nan=False) + "\n")


@dataclass(frozen=True)
class Table:
    """One CSV artifact: named columns plus rows of plain values."""

    columns: tuple[str, ...]
    rows: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_csv_cell(v) for v in row])
        return buf.getvalue()


def square_matrix_table(labels, values: np.ndarray) -> Table:
    labels = [str(x) for x in labels]
    rows = [[label] + list(row) for label, row in zip(labels, np.asarray(values))]
    return Table(columns=tuple(["label"] + labels), rows=rows)


def projection_table(labels, coords: np.ndarray) -> Table:
    rows = [[str(label), float(x), float(y)] for label, (x, y) in zip(labels, np.asarray(coords))]
    return Table(columns=("label", "x", "y"), rows=rows)


@dataclass
class ExperimentReport:
    """Everything one experiment produced, ready to serialize."""

    config: dict
    labels: Table | None = None
    matrix: Table | None = None
    neighbors: Table | None = None
    scale: Table | None = None
    projection: Table | None = None
    summary: dict = field(default_factory=dict)

    _FILES = (
        ("labels", "labels.csv"),
        ("matrix", "matrix.csv"),
        ("neighbors", "neighbors.csv"),
        ("scale", "scale.csv"),
        ("projection", "projection.csv"),
    )

    def write(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        write_json(os.path.join(out_dir, "config.json"), self.config)
        for attr, filename in self._FILES:
            table = getattr(self, attr)
            if table is not None:
                atomic_write_text(os.path.join(out_dir, filename), table.to_csv())
        write_json(os.path.join(out_dir, "summary.json"), self.summary)
