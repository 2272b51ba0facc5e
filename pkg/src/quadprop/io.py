"""CSV helpers shared by the modules and the CLI.

Floats are written with ``repr`` (shortest round-trip form) so that the same
numbers always produce byte-identical files.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence


def fmt(x) -> str:
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return repr(float(x))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """Return ``(comments, header, rows)`` with rows as lists of strings."""
    comments, body = [], []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                comments.append(line[1:].strip())
            elif line.strip():
                body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    return comments, header, list(reader)
