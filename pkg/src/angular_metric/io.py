"""Feature files: ``#`` comment lines, then rows ``label,v1,...,vD``.

Values are written with 17 significant digits, so a dataset survives a
write/read cycle bit for bit.
"""

import math

import numpy as np

from .errors import ParseError
from .sampling import LabeledDataset


def format_features(data: LabeledDataset, comments=()):
    lines = [f"# {c}" for c in comments]
    for label, row in zip(data.labels.tolist(), data.vectors):
        lines.append(",".join([str(label)] + [format(float(v), ".17g") for v in row]))
    return "\n".join(lines) + "\n"


def parse_features(text) -> LabeledDataset:
    labels, rows = [], []
    width = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
            if width < 2:
                raise ParseError(f"line {lineno}: need a label and at least one value")
        elif len(cells) != width:
            raise ParseError(f"line {lineno}: expected {width} columns, got {len(cells)}")
        try:
            label = int(cells[0])
            values = [float(c) for c in cells[1:]]
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
        if label < 0:
            raise ParseError(f"line {lineno}: labels must be nonnegative")
        if not all(math.isfinite(v) for v in values):
            raise ParseError(f"line {lineno}: non-finite value")
        labels.append(label)
        rows.append(values)
    if not rows:
        raise ParseError("no data rows")
    return LabeledDataset(np.array(rows, dtype=np.float64), np.array(labels, dtype=np.int64))


def write_features(path, data, comments=()):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_features(data, comments))


def read_features(path):
    with open(path, encoding="ascii") as fh:
        return parse_features(fh.read())
