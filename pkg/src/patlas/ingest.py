"""Corpus ingestion: raw record parsing, application merging, matrix building.

Input formats (one publication per row/line):

* JSONL keys: ``publication_id, application_id, application_year, title,
  abstract, ipc, dwpi_assignees, original_assignees, us_reassignment``.
  ``ipc`` is a list of code strings; ``dwpi_assignees`` a list of
  ``[name, code]`` pairs; ``original_assignees`` a list of
  ``[name, address]`` pairs; ``us_reassignment`` an optional string.
* CSV: same names as headers. List fields join items with ``;``; pair items
  join their two parts with ``|``. Because DWPI codes themselves contain a
  pipe (e.g. ``UYHE|N``), pairs are split on the first ``|`` only.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import pickle
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError, PatlasError

logger = logging.getLogger(__name__)

JSONL_KEYS = (
    "publication_id", "application_id", "application_year", "title", "abstract",
    "ipc", "dwpi_assignees", "original_assignees", "us_reassignment",
)

_SUBCLASS_RE = re.compile(r"^[A-Z][0-9]{2}[A-Z]$")

CORPUS_MAGIC = b"PATLAS\x01C"  # binary corpus format, version 1
MAX_OBSERVED_SUBCLASSES = 19


@dataclass(frozen=True)
class RawRecord:
    """One publication-stage record, before application merging."""

    publication_id: str
    application_id: str
    application_year: int
    title: str
    abstract: str
    ipc_subclasses: tuple[str, ...]
    dwpi_assignees: tuple[tuple[str, str], ...]  # (name, code)
    original_assignees: tuple[tuple[str, str], ...]  # (name, address)
    us_reassignment_field: str | None = None


@dataclass(frozen=True)
class PatentRecord:
    """One distinct application, merged over its publication records."""

    application_id: str
    year: int
    ipc_subclasses: tuple[str, ...]  # deduplicated, sorted
    merged_publication_ids: tuple[str, ...]
    title: str
    abstract: str
    first_assignee_names: tuple[str, ...]
    first_assignee_address: str
    assignee_name_pool: tuple[tuple[str, str], ...]  # all (name, code) pairs
    us_reassignment_field: str | None = None


class SparseBinaryMatrix:
    """Patents × IPC-subclass incidence matrix stored in CSR form.

    Entries are presence-only (no weights). Rows with no codes are excluded
    before construction, so every row has degree >= 1 when built through
    :func:`filter_and_build_matrix`.
    """

    __slots__ = ("n_rows", "n_cols", "row_labels", "col_labels", "indptr", "indices", "_csc")

    def __init__(self, n_rows, n_cols, indptr, indices, row_labels=None, col_labels=None):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int32)
        if self.indptr.shape != (self.n_rows + 1,):
            raise PatlasError("indptr length must be n_rows + 1")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.n_cols):
            raise PatlasError("column index out of range")
        self.row_labels = tuple(row_labels) if row_labels is not None else None
        self.col_labels = tuple(col_labels) if col_labels is not None else None
        self._csc = None

    @classmethod
    def from_rows(cls, rows, n_cols, row_labels=None, col_labels=None):
        """Build from per-row iterables of column indices (deduplicated)."""
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        chunks = []
        for i, cols in enumerate(rows):
            cols = np.unique(np.asarray(sorted(set(cols)), dtype=np.int32))
            chunks.append(cols)
            indptr[i + 1] = indptr[i] + len(cols)
        indices = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int32)
        return cls(len(rows), n_cols, indptr, indices, row_labels, col_labels)

    @classmethod
    def from_entries(cls, n_rows, n_cols, entries, row_labels=None, col_labels=None):
        rows = [[] for _ in range(n_rows)]
        for i, j in entries:
            rows[i].append(j)
        return cls.from_rows(rows, n_cols, row_labels, col_labels)

    @classmethod
    def from_dense(cls, dense, row_labels=None, col_labels=None):
        dense = np.asarray(dense)
        rows = [np.flatnonzero(dense[i]) for i in range(dense.shape[0])]
        return cls.from_rows(rows, dense.shape[1], row_labels, col_labels)

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    @property
    def row_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def col_degrees(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.n_cols).astype(np.int64)

    def entries(self):
        """Iterate (row, col) index pairs."""
        for i in range(self.n_rows):
            for p in range(self.indptr[i], self.indptr[i + 1]):
                yield i, int(self.indices[p])

    def csc(self):
        """(indptr, indices) of the transpose, cached."""
        if self._csc is None:
            order = np.argsort(self.indices, kind="stable")
            owner = np.repeat(np.arange(self.n_rows, dtype=np.int32), np.diff(self.indptr))
            col_indptr = np.zeros(self.n_cols + 1, dtype=np.int64)
            np.cumsum(np.bincount(self.indices, minlength=self.n_cols), out=col_indptr[1:])
            self._csc = (col_indptr, owner[order])
        return self._csc

    def take_rows(self, keep, drop_empty_cols=True):
        """Submatrix of the given row indices (sorted); optionally drops
        columns that become empty."""
        keep = np.asarray(sorted(keep), dtype=np.int64)
        rows = [self.indices[self.indptr[i]:self.indptr[i + 1]] for i in keep]
        labels = [self.row_labels[i] for i in keep] if self.row_labels else None
        if not drop_empty_cols:
            return SparseBinaryMatrix.from_rows(rows, self.n_cols, labels, self.col_labels)
        used = np.zeros(self.n_cols, dtype=bool)
        for cols in rows:
            used[cols] = True
        remap = np.full(self.n_cols, -1, dtype=np.int32)
        kept_cols = np.flatnonzero(used)
        remap[kept_cols] = np.arange(len(kept_cols), dtype=np.int32)
        new_rows = [remap[cols] for cols in rows]
        col_labels = [self.col_labels[j] for j in kept_cols] if self.col_labels else None
        return SparseBinaryMatrix.from_rows(new_rows, len(kept_cols), labels, col_labels)

    def take_cols(self, keep, drop_empty_rows=True):
        return self.transpose().take_rows(keep, drop_empty_cols=drop_empty_rows).transpose()

    def transpose(self):
        col_indptr, col_indices = self.csc()
        return SparseBinaryMatrix(self.n_cols, self.n_rows, col_indptr.copy(),
                                  col_indices.astype(np.int32),
                                  self.col_labels, self.row_labels)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_rows, self.n_cols), dtype=np.int8)
        for i, j in self.entries():
            dense[i, j] = 1
        return dense


@dataclass(frozen=True)
class DegreeDistribution:
    """(degree, frequency) points plus the log-log OLS slope (None if undefined)."""

    points: tuple[tuple[int, int], ...]
    slope: float | None = field(default=None)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _clean_subclass(code: str, line_number: int) -> str:
    code = code.strip().upper()[:4]
    if not _SUBCLASS_RE.match(code):
        raise ParseError(f"bad IPC subclass {code!r}", line_number)
    return code


def _split_pairs(raw: str) -> list[tuple[str, str]]:
    pairs = []
    for item in raw.split(";"):
        item = item.strip()
        if not item:
            continue
        left, _, right = item.partition("|")
        pairs.append((left.strip(), right.strip()))
    return pairs


def _record_from_fields(fields: dict, line_number: int, list_form: bool) -> RawRecord:
    pub = str(fields.get("publication_id") or "").strip()
    if not pub:
        raise ParseError("missing publication_id", line_number)
    app = str(fields.get("application_id") or "").strip()
    if not app:
        raise ParseError("missing application_id", line_number)
    try:
        year = int(fields["application_year"])
    except (KeyError, TypeError, ValueError):
        raise ParseError("bad or missing application_year", line_number) from None

    if list_form:
        ipc_raw = fields.get("ipc") or []
        dwpi = [(str(n).strip(), str(c).strip()) for n, c in (fields.get("dwpi_assignees") or [])]
        orig = [(str(n).strip(), str(a).strip()) for n, a in (fields.get("original_assignees") or [])]
    else:
        ipc_raw = [c for c in (fields.get("ipc") or "").split(";") if c.strip()]
        dwpi = _split_pairs(fields.get("dwpi_assignees") or "")
        orig = _split_pairs(fields.get("original_assignees") or "")
    ipc = tuple(_clean_subclass(str(c), line_number) for c in ipc_raw)
    reassignment = fields.get("us_reassignment")
    if reassignment is not None:
        reassignment = str(reassignment).strip() or None
    return RawRecord(
        publication_id=pub,
        application_id=app,
        application_year=year,
        title=str(fields.get("title") or "").strip(),
        abstract=str(fields.get("abstract") or "").strip(),
        ipc_subclasses=ipc,
        dwpi_assignees=tuple(dwpi),
        original_assignees=tuple(orig),
        us_reassignment_field=reassignment,
    )


def parse_records(path, format: str) -> list[RawRecord]:
    """Parse a raw publication file into RawRecords.

    ``format`` is ``"csv"`` or ``"jsonl"``; anything else raises ConfigError.
    Malformed lines raise ParseError carrying the 1-based line number, and a
    publication_id may appear only once per file.
    """
    path = Path(path)
    if format not in ("csv", "jsonl"):
        raise ConfigError(f"unknown input format: {format!r}")
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    records: list[RawRecord] = []
    seen: set[str] = set()
    text = path.read_text(encoding="utf-8")
    if format == "jsonl":
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                fields = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad JSON ({exc.msg})", line_no) from None
            if not isinstance(fields, dict):
                raise ParseError("expected a JSON object", line_no)
            rec = _record_from_fields(fields, line_no, list_form=True)
            if rec.publication_id in seen:
                raise ParseError(f"duplicate publication_id {rec.publication_id!r}", line_no)
            seen.add(rec.publication_id)
            records.append(rec)
    else:
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None:
            return []
        missing = [k for k in JSONL_KEYS if k != "us_reassignment" and k not in reader.fieldnames]
        if missing:
            raise ConfigError(f"csv header missing columns: {', '.join(missing)}")
        for row in reader:
            line_no = reader.line_num
            if row.get("publication_id") is None and not any(v for v in row.values()):
                continue
            rec = _record_from_fields(row, line_no, list_form=False)
            if rec.publication_id in seen:
                raise ParseError(f"duplicate publication_id {rec.publication_id!r}", line_no)
            seen.add(rec.publication_id)
            records.append(rec)
    return records


# ---------------------------------------------------------------------------
# merging
# ---------------------------------------------------------------------------

def merge_applications(records: list[RawRecord]) -> list[PatentRecord]:
    """Collapse publication records into one PatentRecord per application_id.

    Year is the earliest application_year; title/abstract (and the original
    assignee list) come from the latest publication, ordered by
    (application_year, publication_id) so merging is input-order independent.
    """
    groups: dict[str, list[RawRecord]] = {}
    for rec in records:
        groups.setdefault(rec.application_id, []).append(rec)
    merged = []
    for app_id in sorted(groups):
        group = sorted(groups[app_id], key=lambda r: (r.application_year, r.publication_id))
        latest = group[-1]
        ipc = tuple(sorted({c for r in group for c in r.ipc_subclasses}))
        if len(ipc) > MAX_OBSERVED_SUBCLASSES:
            logger.info("application %s lists %d subclasses", app_id, len(ipc))
        pool = tuple(sorted({pair for r in group for pair in r.dwpi_assignees}))
        with_orig = [r for r in reversed(group) if r.original_assignees]
        orig_src = with_orig[0] if with_orig else None
        with_us = [r.us_reassignment_field for r in reversed(group) if r.us_reassignment_field]
        merged.append(PatentRecord(
            application_id=app_id,
            year=min(r.application_year for r in group),
            ipc_subclasses=ipc,
            merged_publication_ids=tuple(sorted(r.publication_id for r in group)),
            title=latest.title,
            abstract=latest.abstract,
            first_assignee_names=tuple(n for n, _ in orig_src.original_assignees) if orig_src else (),
            first_assignee_address=orig_src.original_assignees[0][1] if orig_src else "",
            assignee_name_pool=pool,
            us_reassignment_field=with_us[0] if with_us else None,
        ))
    return merged


def filter_and_build_matrix(apps: list[PatentRecord]) -> SparseBinaryMatrix:
    """Build the binary patent × subclass matrix.

    Rows: patents with at least one subclass, in input order. Columns: the
    sorted set of subclasses that occur at least once.
    """
    with_codes = [p for p in apps if p.ipc_subclasses]
    if not with_codes:
        raise PatlasError("empty matrix: no patent has IPC subclasses")
    codes = sorted({c for p in with_codes for c in p.ipc_subclasses})
    col_of = {c: j for j, c in enumerate(codes)}
    rows = [[col_of[c] for c in p.ipc_subclasses] for p in with_codes]
    return SparseBinaryMatrix.from_rows(
        rows, len(codes),
        row_labels=[p.application_id for p in with_codes],
        col_labels=codes,
    )


def degree_distribution(m: SparseBinaryMatrix, axis: str) -> DegreeDistribution:
    """Degree histogram for rows or cols, plus the OLS slope of log10 frequency
    on log10 degree (degrees with frequency >= 1; degree 0 excluded from the
    fit). Slope is None with fewer than two distinct positive degrees.
    """
    if axis not in ("rows", "cols"):
        raise ConfigError(f"axis must be 'rows' or 'cols', got {axis!r}")
    if m.nnz == 0:
        raise PatlasError("empty matrix")
    degrees = m.row_degrees if axis == "rows" else m.col_degrees
    freq = np.bincount(degrees)
    points = tuple((int(d), int(freq[d])) for d in np.flatnonzero(freq))
    fit_pts = [(d, f) for d, f in points if d > 0]
    slope = None
    if len(fit_pts) >= 2:
        x = np.log10([d for d, _ in fit_pts])
        y = np.log10([f for _, f in fit_pts])
        slope = float(np.polyfit(x, y, 1)[0])
    return DegreeDistribution(points=points, slope=slope)


# ---------------------------------------------------------------------------
# binary corpus files
# ---------------------------------------------------------------------------

def save_corpus(patents: list[PatentRecord], path) -> None:
    payload = pickle.dumps(list(patents), protocol=4)
    Path(path).write_bytes(CORPUS_MAGIC + payload)


def load_corpus(path) -> list[PatentRecord]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"corpus file not found: {path}")
    blob = path.read_bytes()
    if not blob.startswith(CORPUS_MAGIC[:6]):
        raise ConfigError(f"not a patlas corpus file: {path}")
    if not blob.startswith(CORPUS_MAGIC):
        raise ConfigError(f"unsupported corpus version in {path}")
    return pickle.loads(blob[len(CORPUS_MAGIC):])
