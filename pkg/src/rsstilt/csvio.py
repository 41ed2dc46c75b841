"""CSV reading and writing.

Files are UTF-8 CSV. Lines starting with ``#`` carry metadata and are
skipped by the readers. Floats are written with 17 significant digits so
values survive a write/read round trip bit for bit.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Mapping, TextIO

import numpy as np

from .core import UrssSample
from .errors import InvalidDesign


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _data_lines(handle: TextIO) -> list[str]:
    return [line for line in handle if line.strip() and not line.lstrip().startswith("#")]


def _read_table(source: str | Path | TextIO, header: tuple[str, ...]) -> list[dict[str, str]]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            lines = _data_lines(fh)
    else:
        lines = _data_lines(source)
    reader = csv.DictReader(lines)
    fields = tuple(f.strip() for f in (reader.fieldnames or ()))
    if fields[: len(header)] != header:
        raise InvalidDesign(f"expected header {','.join(header)}, got {','.join(fields)}")
    return [{k.strip(): v for k, v in row.items() if k is not None} for row in reader]


def read_urss(source: str | Path | TextIO) -> UrssSample:
    """Read a ``rank,value`` CSV; the design is inferred from the rank counts.

    Extra columns (such as ``resample_id``) are ignored.
    """
    rows = _read_table(source, ("rank", "value"))
    if not rows:
        raise InvalidDesign("no data rows")
    ranks = [int(r["rank"]) for r in rows]
    values = [float(r["value"]) for r in rows]
    k = max(ranks)
    if min(ranks) < 1:
        raise InvalidDesign("ranks are 1-based")
    grouped: list[list[float]] = [[] for _ in range(k)]
    for rank, value in zip(ranks, values):
        grouped[rank - 1].append(value)
    missing = [r + 1 for r, g in enumerate(grouped) if not g]
    if missing:
        raise InvalidDesign(f"ranks {missing} have no observations")
    return UrssSample(tuple(grouped))


def read_population(source: str | Path | TextIO) -> np.ndarray:
    """Read a ``y,concomitant`` CSV into an ``(N, 2)`` array."""
    rows = _read_table(source, ("y", "concomitant"))
    return np.array([[float(r["y"]), float(r["concomitant"])] for r in rows]).reshape(-1, 2)


def metadata_lines(meta: Mapping[str, object]) -> str:
    return "".join(f"# {key}={fmt(value)}\n" for key, value in meta.items())


def urss_csv(sample: UrssSample, meta: Mapping[str, object] | None = None) -> str:
    buf = io.StringIO()
    if meta:
        buf.write(metadata_lines(meta))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "value"])
    for r, row in enumerate(sample.rows, start=1):
        for v in row:
            writer.writerow([r, fmt(v)])
    return buf.getvalue()


def table_csv(header: Iterable[str], rows: Iterable[Iterable[object]], meta: Mapping[str, object] | None = None) -> str:
    buf = io.StringIO()
    if meta:
        buf.write(metadata_lines(meta))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    return buf.getvalue()
