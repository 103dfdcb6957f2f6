"""Snapshot CSV and JSON output.

Snapshots are written one atom per row under the header
``time,atom,location,weight``. Numbers use 17 significant digits so that a
round trip reproduces the measures exactly. An empty snapshot is written as a
single row with empty ``atom``, ``location`` and ``weight`` fields so that its
time survives the round trip.
"""
from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError, InvalidArgumentError
from .linear import _jsonable
from .measures import AtomicMeasure, MeasurePath
from .spaces import MetricSpace

HEADER = ("time", "atom", "location", "weight")


def _fmt(v) -> str:
    return format(float(v), ".17g")


def snapshots_to_csv(path: MeasurePath) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    space = path.space
    for t, mu in zip(path.grid, path.snapshots):
        if len(mu) == 0:
            w.writerow([_fmt(t), "", "", ""])
            continue
        for i, (x, m) in enumerate(mu):
            w.writerow([_fmt(t), i, space.format_point(x), _fmt(m)])
    return buf.getvalue()


def write_snapshots(path: MeasurePath, file) -> None:
    Path(file).write_text(snapshots_to_csv(path))


def read_snapshots(file, space: MetricSpace) -> MeasurePath:
    """Read a snapshot CSV written by :func:`write_snapshots`."""
    with open(file, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            raise InvalidArgumentError(f"{file}: expected header {','.join(HEADER)}")
        times, atoms = [], {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise InvalidArgumentError(f"{file}:{lineno}: expected 4 columns")
            t = float(row[0])
            if not times or times[-1] != t:
                if times and t < times[-1]:
                    raise InvalidArgumentError(f"{file}:{lineno}: times must be nondecreasing")
                times.append(t)
                atoms[t] = ([], [])
            if row[1] == "":
                continue
            try:
                x = space.parse_point(row[2])
            except (ValueError, IndexError) as exc:
                raise InvalidArgumentError(f"{file}:{lineno}: bad location {row[2]!r}") from exc
            atoms[t][0].append(x)
            atoms[t][1].append(float(row[3]))
    if not times:
        raise InvalidArgumentError(f"{file}: no snapshots")
    snaps = []
    for t in times:
        locs, w = atoms[t]
        snaps.append(AtomicMeasure(space, np.array(locs) if locs else None, w if locs else None))
    return MeasurePath(np.array(times), snaps)


def dumps_json(obj) -> str:
    """Sorted-key JSON with non-finite floats written as strings."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(obj, file) -> None:
    Path(file).write_text(dumps_json(obj))


def read_json(file) -> dict:
    try:
        with open(file) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{file}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
