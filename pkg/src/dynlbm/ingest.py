"""Parsing contact logs and aggregating them into interval count tensors.

Two text formats are understood:

``tsv_t_i_j``
    one raw contact per line, ``timestamp<TAB>id<TAB>id``; ``#`` lines are
    comments. Each line stands for one recording window (20 s by default).
``csv_quad``
    already aggregated rows ``id,id,interval,count`` with an optional
    header line.

Binning convention: a record with timestamp ``t`` falls into bin
``floor((t - t_start) / bin_width)``, i.e. bins are ``[start, end)``. With
``bin_width=900`` timestamps 899 and 900 land in bins 0 and 1.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO, Union

import numpy as np

from .core import ContractError, CountTensor, EventRecord

FORMATS = ("tsv_t_i_j", "csv_quad")
DUMP_VERSION = 1


class IngestError(ValueError):
    """Malformed input or a record outside the binning window."""


@dataclass(frozen=True)
class RawContact:
    t: int
    u_id: str
    v_id: str

    def __post_init__(self):
        if self.t < 0:
            raise IngestError(f"negative timestamp in {self}")


@dataclass(frozen=True)
class BinningSpec:
    t_start: int
    t_end: int
    bin_width: int
    record_duration: int = 20

    def __post_init__(self):
        if self.bin_width <= 0:
            raise IngestError("bin_width must be positive")
        if self.t_end <= self.t_start:
            raise IngestError("t_end must exceed t_start")
        if (self.t_end - self.t_start) % self.bin_width:
            raise IngestError("t_end - t_start must be a multiple of bin_width")

    @property
    def n_bins(self) -> int:
        return (self.t_end - self.t_start) // self.bin_width

    def bin_of(self, t: int) -> int:
        return (t - self.t_start) // self.bin_width


class IdIndex:
    """Stable id -> dense index mapping in first-appearance order."""

    def __init__(self, ids: Iterable[str] = ()):
        self._index: dict[str, int] = {}
        for i in ids:
            self.add(i)

    def add(self, key: str) -> int:
        idx = self._index.get(key)
        if idx is None:
            idx = self._index[key] = len(self._index)
        return idx

    def __getitem__(self, key: str) -> int:
        return self._index[key]

    def __contains__(self, key) -> bool:
        return key in self._index

    def __len__(self) -> int:
        return len(self._index)

    @property
    def ids(self) -> list[str]:
        return list(self._index)

    def __eq__(self, other):
        return isinstance(other, IdIndex) and self.ids == other.ids


@dataclass
class Parsed:
    """Parser output: records plus the row and column id dictionaries.

    For unipartite input ``row_ids`` and ``col_ids`` are the same object.
    """

    records: list
    row_ids: IdIndex
    col_ids: IdIndex
    fmt: str
    unipartite: bool = False


def _int_field(value: str, lineno: int, name: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise IngestError(f"line {lineno}: {name} {value!r} is not an integer") from None


def _open_text(stream: Union[str, os.PathLike, TextIO]):
    if isinstance(stream, (str, os.PathLike)):
        return open(stream, encoding="utf-8", newline="")
    return stream


def parse_contacts(stream, fmt: str, unipartite: Optional[bool] = None) -> Parsed:
    """Parse a contact stream (path or text file object).

    ``unipartite`` defaults to True for ``tsv_t_i_j`` (both ids index one
    attendee set) and False for ``csv_quad``.
    """
    if fmt not in FORMATS:
        raise IngestError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    if unipartite is None:
        unipartite = fmt == "tsv_t_i_j"
    row_ids = IdIndex()
    col_ids = row_ids if unipartite else IdIndex()

    fh = _open_text(stream)
    try:
        if fmt == "tsv_t_i_j":
            records = _parse_tsv(fh, row_ids, col_ids)
        else:
            records = _parse_quad(fh, row_ids, col_ids)
    finally:
        if fh is not stream:
            fh.close()
    return Parsed(records, row_ids, col_ids, fmt, unipartite)


def _parse_tsv(fh, row_ids, col_ids) -> list[RawContact]:
    out = []
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            parts = line.split()
        if len(parts) != 3:
            raise IngestError(f"line {lineno}: expected 3 fields, got {len(parts)}")
        t = _int_field(parts[0], lineno, "timestamp")
        if t < 0:
            raise IngestError(f"line {lineno}: negative timestamp {t}")
        u, v = parts[1].strip(), parts[2].strip()
        if u == v:
            raise IngestError(f"line {lineno}: self-contact of {u!r}")
        row_ids.add(u)
        col_ids.add(v)
        out.append(RawContact(t, u, v))
    return out


def _parse_quad(fh, row_ids, col_ids) -> list[EventRecord]:
    out = []
    reader = csv.reader(fh)
    first = True
    for lineno, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if row[0].lstrip().startswith("#"):
            continue
        if len(row) != 4:
            raise IngestError(f"line {lineno}: expected 4 fields, got {len(row)}")
        row = [x.strip() for x in row]
        if first:
            first = False
            try:
                int(row[2]), int(row[3])
            except ValueError:
                continue  # header
        interval = _int_field(row[2], lineno, "interval")
        count = _int_field(row[3], lineno, "count")
        if interval < 0 or count < 0:
            raise IngestError(f"line {lineno}: interval and count must be non-negative")
        out.append(EventRecord(row_ids.add(row[0]), col_ids.add(row[1]), interval, count))
    return out


def _natural_key(s: str):
    try:
        return (0, int(s), s)
    except ValueError:
        return (1, 0, s)


def aggregate(contacts: Iterable[RawContact], spec: BinningSpec, ids: Optional[IdIndex] = None,
              symmetric: bool = False, drop_outside: bool = False) -> tuple[CountTensor, IdIndex]:
    """Count raw contacts per (pair, bin) into an N x N x U tensor.

    Pairs are unordered: each record is stored once, at (smaller id, larger
    id) under numeric-then-lexicographic id order, so the result does not
    depend on the order of records or on how a record orients its pair.
    ``symmetric=True`` stores every record at both orientations instead.
    Records outside ``[t_start, t_end)`` raise unless ``drop_outside``.
    """
    contacts = list(contacts)
    if ids is None:
        ids = IdIndex()
        for rc in contacts:
            ids.add(rc.u_id)
            ids.add(rc.v_id)
    rows, cols, bins = [], [], []
    for n, rc in enumerate(contacts):
        if not spec.t_start <= rc.t < spec.t_end:
            if drop_outside:
                continue
            raise IngestError(f"record {n} ({rc.t}, {rc.u_id}, {rc.v_id}) outside [{spec.t_start}, {spec.t_end})")
        if rc.u_id == rc.v_id:
            raise IngestError(f"record {n}: self-contact of {rc.u_id!r}")
        a, b = sorted((rc.u_id, rc.v_id), key=_natural_key)
        u = spec.bin_of(rc.t)
        rows.append(ids[a])
        cols.append(ids[b])
        bins.append(u)
        if symmetric:
            rows.append(ids[b])
            cols.append(ids[a])
            bins.append(u)
    n_ids = max(len(ids), 1)
    tensor = CountTensor((n_ids, n_ids, spec.n_bins), rows, cols, bins, np.ones(len(rows), dtype=np.int64))
    return tensor, ids


def tensor_from_quads(parsed: Parsed, n_intervals: Optional[int] = None) -> CountTensor:
    """Tensor from parsed csv_quad records; U defaults to max interval + 1."""
    recs = parsed.records
    max_u = max((r.interval for r in recs), default=0)
    if n_intervals is None:
        n_intervals = max_u + 1
    elif recs and max_u >= n_intervals:
        raise IngestError(f"interval {max_u} out of range for U={n_intervals}")
    shape = (max(len(parsed.row_ids), 1), max(len(parsed.col_ids), 1), n_intervals)
    return CountTensor.from_records(shape, recs)


@dataclass
class Dump:
    tensor: CountTensor
    row_ids: list[str]
    col_ids: list[str]
    delta_t: float = 1.0
    extra: dict = field(default_factory=dict)


def _sidecar_path(prefix) -> str:
    return f"{prefix}.json"


def _csv_path(prefix) -> str:
    return f"{prefix}.csv"


def dump_prefix(path) -> str:
    """Strip a .csv or .json suffix so either file of a dump can be named."""
    s = os.fspath(path)
    for ext in (".csv", ".json"):
        if s.endswith(ext):
            return s[: -len(ext)]
    return s


def write_dump(prefix, tensor: CountTensor, row_ids=None, col_ids=None, delta_t: float = 1.0,
               extra: Optional[dict] = None) -> tuple[str, str]:
    """Write ``<prefix>.csv`` (csv_quad with header) and ``<prefix>.json``."""
    row_ids = list(row_ids) if row_ids is not None else [str(i) for i in range(tensor.n_rows)]
    col_ids = list(col_ids) if col_ids is not None else [str(j) for j in range(tensor.n_cols)]
    if len(row_ids) != tensor.n_rows or len(col_ids) != tensor.n_cols:
        raise IngestError("id dictionaries do not match tensor dimensions")
    csv_path, json_path = _csv_path(prefix), _sidecar_path(prefix)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row", "col", "interval", "count"])
    r, c, t = tensor.coords
    for i, j, u, n in zip(r, c, t, tensor.counts):
        writer.writerow([row_ids[i], col_ids[j], int(u), int(n)])
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    meta = {
        "dump_version": DUMP_VERSION,
        "data": os.path.basename(csv_path),
        "N": tensor.n_rows,
        "M": tensor.n_cols,
        "U": tensor.n_intervals,
        "delta_t": delta_t,
        "row_ids": row_ids,
        "col_ids": col_ids,
    }
    if extra:
        meta.update(extra)
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


def read_dump(path) -> Dump:
    prefix = dump_prefix(path)
    try:
        with open(_sidecar_path(prefix), encoding="utf-8") as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as e:
        raise IngestError(f"invalid sidecar JSON: {e}") from None
    try:
        row_ids, col_ids = [str(x) for x in meta["row_ids"]], [str(x) for x in meta["col_ids"]]
        shape = (int(meta["N"]), int(meta["M"]), int(meta["U"]))
    except KeyError as e:
        raise IngestError(f"sidecar missing field {e.args[0]!r}") from None
    if len(row_ids) != shape[0] or len(col_ids) != shape[1]:
        raise IngestError("sidecar id dictionaries do not match N, M")
    data_path = os.path.join(os.path.dirname(prefix) or ".", meta.get("data", os.path.basename(_csv_path(prefix))))
    rows = IdIndex(row_ids)
    cols = IdIndex(col_ids)
    parsed = parse_contacts(data_path, "csv_quad")
    recs = []
    # re-map through the sidecar dictionaries so indices match the original tensor
    p_rows, p_cols = parsed.row_ids.ids, parsed.col_ids.ids
    for rec in parsed.records:
        rid, cid = p_rows[rec.row], p_cols[rec.col]
        if rid not in rows or cid not in cols:
            raise IngestError(f"id {rid!r} or {cid!r} missing from sidecar dictionaries")
        if rec.interval >= shape[2]:
            raise IngestError(f"interval {rec.interval} out of range for U={shape[2]}")
        recs.append(EventRecord(rows[rid], cols[cid], rec.interval, rec.count))
    try:
        tensor = CountTensor.from_records(shape, recs)
    except ContractError as e:
        raise IngestError(str(e)) from None
    extra = {k: v for k, v in meta.items() if k not in {"N", "M", "U", "row_ids", "col_ids", "delta_t", "data"}}
    return Dump(tensor, row_ids, col_ids, float(meta.get("delta_t", 1.0)), extra)
