"""CSV and JSON persistence with round-trip number formatting."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import InvalidArgument


class MalformedInput(InvalidArgument):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


def fmt(x) -> str:
    """Shortest round-trip decimal; exact zeros print as ``0``."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    x = float(x)
    if x == 0.0:
        return "0"
    if math.isnan(x):
        return "nan"
    return repr(x)


def fmt_set(indices: Iterable[int]) -> str:
    return ";".join(str(i) for i in sorted(indices))


def parse_set(text: str) -> frozenset:
    text = text.strip()
    return frozenset(int(t) for t in text.split(";")) if text else frozenset()


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence], fmt_kind: str = "csv") -> Path:
    """Write rows as CSV, or as a JSON list of records when ``fmt_kind == "json"``.

    The file suffix follows ``fmt_kind``. Strings pass through unchanged.
    """
    path = Path(path).with_suffix("." + fmt_kind)
    path.parent.mkdir(parents=True, exist_ok=True)
    cells = [[c if isinstance(c, str) else fmt(c) for c in row] for row in rows]
    if fmt_kind == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(cells)
    elif fmt_kind == "json":
        records = [dict(zip(header, row)) for row in cells]
        path.write_text(json.dumps(records, indent=1) + "\n")
    else:
        raise InvalidArgument(f"unknown output format {fmt_kind!r}")
    return path


def read_numeric_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(c) if c else math.nan for c in row] for row in reader]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def sample_header(r: int) -> list[str]:
    return [f"phi_{i}" for i in range(1, r + 1)] + ["y"]


def write_samples_csv(path: Path, phi: np.ndarray, y: np.ndarray) -> Path:
    phi = np.atleast_2d(phi)
    rows = [list(row) + [obs] for row, obs in zip(phi, y)]
    return write_table(Path(path), sample_header(phi.shape[1]), rows)


def read_samples_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a ``phi_1,...,phi_r,y`` stream.

    Raises:
        MalformedInput: bad header, empty body, wrong field count or a
            non-finite/non-numeric cell. The message carries the 1-based line.
    """
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise MalformedInput("file is empty", 1)
        header = [h.strip() for h in header]
        r = len(header) - 1
        if r < 1 or header != sample_header(r):
            raise MalformedInput("header must be phi_1,...,phi_r,y", 1)
        data = []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != r + 1:
                raise MalformedInput(f"expected {r + 1} fields, got {len(row)}", line)
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise MalformedInput(str(exc), line) from None
            if not all(math.isfinite(v) for v in vals):
                raise MalformedInput("non-finite value", line)
            data.append(vals)
    if not data:
        raise MalformedInput("no samples after header", 2)
    arr = np.array(data)
    return arr[:, :r], arr[:, r]
