"""CSV readers for the two stokes-hybrid output shapes.

Plain convergence CSVs start with a ``level,cells,...`` header and hold one
refinement study.  Robustness CSVs prepend ``method,nu`` columns; consecutive
rows sharing (method, nu) form one study each.  Lines starting with ``#``
(the robustness summary trailer) are ignored.  All numeric cells were written
with repr() and parse back exactly; empty cells (missing rates) become None.
"""

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path


class EmptyInputError(ValueError):
    pass


class MissingColumnError(ValueError):
    def __init__(self, column, path):
        super().__init__("column %r not found in %s" % (column, path))
        self.column = column
        self.path = path


@dataclass(frozen=True)
class Block:
    """One convergence study: a legend label plus per-column value lists."""

    label: str
    columns: dict

    def values(self, name):
        return self.columns[name]


def _cell(text):
    if text == "":
        return None
    return float(text)


def read_blocks(path):
    """List of Block from one CSV file (either output shape)."""
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            rows.append(row)
    if not rows:
        raise EmptyInputError("no header in %s" % path)
    header, data = rows[0], rows[1:]
    if not data:
        raise EmptyInputError("no data rows in %s" % path)
    if len(set(header)) != len(header):
        raise ValueError("duplicate columns in %s" % path)
    for row in data:
        if len(row) != len(header):
            raise ValueError("ragged row in %s: %r" % (path, row))

    if header[0] == "method":
        cols = header[2:]
        blocks = []
        for (method, nu), group in itertools.groupby(data, key=lambda r: (r[0], r[1])):
            group = list(group)
            values = {c: [_cell(r[i + 2]) for r in group]
                      for i, c in enumerate(cols)}
            blocks.append(Block(label="%s nu=%g" % (method, float(nu)),
                                columns=values))
        return blocks
    values = {c: [_cell(r[i]) for r in data] for i, c in enumerate(header)}
    return [Block(label=path.stem, columns=values)]
