"""CSV / JSON time-series export and re-import."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

COLUMNS = ("t", "member_id", "kind", "qx", "qy", "px", "py", "ux", "uy", "dx", "dy",
           "det_lambda", "sm_eig1", "sm_eig2", "q_b")
VALUE_COLUMNS = COLUMNS[3:]
KIND_ORDER = {"centre": 0, "classical": 1, "bohmian": 2}


@dataclass(eq=False)
class Track:
    """One exported member: a time axis plus whichever value columns apply to it."""

    member_id: int
    kind: str
    t: np.ndarray
    values: dict = field(default_factory=dict)  # column name -> (N,) array

    def __len__(self):
        return len(self.t)

    def column(self, name):
        return self.values.get(name)

    def xy(self):
        return np.column_stack((self.values["qx"], self.values["qy"]))


@dataclass(eq=False)
class SeriesBundle:
    tracks: list
    metadata: dict = field(default_factory=dict)

    def of_kind(self, kind):
        return [tr for tr in self.tracks if tr.kind == kind]

    def ordered(self):
        return sorted(self.tracks, key=lambda tr: (KIND_ORDER.get(tr.kind, 9), tr.kind, tr.member_id))


def _fmt(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def _rows(bundle):
    tracks = bundle.ordered()
    n = max((len(tr) for tr in tracks), default=0)
    for i in range(n):
        for tr in tracks:
            if i < len(tr):
                yield tr, i


def _io_error(path, err):
    return OSError(f"{path}: {err.strerror or err}")


def write_csv(bundle, path):
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for tr, i in _rows(bundle):
                row = [_fmt(tr.t[i]), str(tr.member_id), tr.kind]
                for name in VALUE_COLUMNS:
                    col = tr.values.get(name)
                    row.append("" if col is None else _fmt(col[i]))
                w.writerow(row)
    except OSError as err:
        raise _io_error(path, err) from err
    return path


def _json_value(x):
    x = float(x)
    return None if math.isnan(x) else x


def write_json(bundle, path):
    """Records mirror the CSV columns; floats use the shortest exact repr, NaN and n/a become null."""
    path = Path(path)
    records = []
    for tr, i in _rows(bundle):
        rec = {"t": _json_value(tr.t[i]), "member_id": tr.member_id, "kind": tr.kind}
        for name in VALUE_COLUMNS:
            col = tr.values.get(name)
            rec[name] = None if col is None else _json_value(col[i])
        records.append(rec)
    doc = {"metadata": bundle.metadata, "columns": list(COLUMNS), "records": records}
    try:
        path.write_text(json.dumps(doc, indent=1, sort_keys=False, allow_nan=False) + "\n", encoding="ascii")
    except OSError as err:
        raise _io_error(path, err) from err
    return path


def export_series(bundle, path, fmt="csv"):
    """Write ``bundle`` as csv or json; returns the manifest (list of written paths)."""
    if fmt == "csv":
        return [write_csv(bundle, path)]
    if fmt == "json":
        return [write_json(bundle, path)]
    raise ValueError(f"unknown export format {fmt!r}")


def _collect(records, metadata):
    groups = {}
    for rec in records:
        key = (rec["kind"], int(rec["member_id"]))
        groups.setdefault(key, []).append(rec)
    tracks = []
    for (kind, mid), recs in groups.items():
        t = np.array([r["t"] for r in recs], dtype=float)
        values = {}
        for name in VALUE_COLUMNS:
            col = [r[name] for r in recs]
            if all(v is None for v in col):
                continue
            values[name] = np.array([np.nan if v is None else v for v in col], dtype=float)
        tracks.append(Track(mid, kind, t, values))
    return SeriesBundle(tracks, metadata)


def read_series(path):
    """Inverse of export_series for either format (chosen by suffix)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="ascii")
    except OSError as err:
        raise _io_error(path, err) from err
    if path.suffix == ".json":
        doc = json.loads(text)
        return _collect(doc["records"], doc.get("metadata", {}))
    reader = csv.reader(text.splitlines())
    header = next(reader, None)
    if header is None or tuple(header) != COLUMNS:
        raise ValueError(f"{path}: not a series CSV (unexpected header)")
    records = []
    for row in reader:
        rec = {"t": float(row[0]), "member_id": int(row[1]), "kind": row[2]}
        for name, cell in zip(VALUE_COLUMNS, row[3:]):
            rec[name] = None if cell == "" else float(cell)
        records.append(rec)
    return _collect(records, {})
