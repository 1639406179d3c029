"""On-disk formats: records CSV, strata CSV, submissions table, JSON outputs.

Every CSV written here starts with a ``# pvalmix <kind> v<N>`` line; readers
skip lines starting with ``#``.
"""

import contextlib
import csv
import io
import json
import math
import os
import tempfile

from .errors import DataError
from .model import Censored, Exact, Rounded
from .parser import EQUALS, LEQ, LESS, PValueRecord
from .trend import StratumEstimate

SCHEMA_VERSION = 1
RECORD_FIELDS = ["doc_id", "journal", "year", "comparison", "value", "raw_span"]
STRATUM_FIELDS = ["journal", "year", "pi0_hat", "sd", "n_obs", "converged"]
HIST_FIELDS = ["bin_lo", "bin_hi", "exact", "rounded", "censored"]
HIST_WIDTH = 0.0025


def _header(kind):
    return f"# pvalmix {kind} v{SCHEMA_VERSION}\n"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(kind, fields, rows):
    buf = io.StringIO()
    buf.write(_header(kind))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj):
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _rows(text_or_lines):
    lines = text_or_lines.splitlines() if isinstance(text_or_lines, str) else text_or_lines
    return csv.DictReader(line for line in lines if not line.startswith("#"))


def _require(reader, fields, what):
    missing = [f for f in fields if f not in (reader.fieldnames or [])]
    if missing:
        raise DataError(f"{what} is missing columns: {', '.join(missing)}")


def records_csv(records):
    return csv_text("records", RECORD_FIELDS, (
        (r.doc_id, r.journal, r.year, r.comparison, float(r.value), r.raw_span) for r in records))


def read_records(text):
    reader = _rows(text)
    _require(reader, RECORD_FIELDS, "records CSV")
    out = []
    for i, row in enumerate(reader, start=2):
        try:
            comparison = row["comparison"]
            if comparison not in (EQUALS, LESS, LEQ):
                raise ValueError(f"unknown comparison {comparison!r}")
            out.append(PValueRecord(row["doc_id"], row["journal"], int(row["year"]), comparison,
                                    float(row["value"]), row["raw_span"]))
        except (TypeError, ValueError) as exc:
            raise DataError(f"records CSV line {i}: {exc}") from None
    return out


def strata_csv(estimates):
    return csv_text("strata", STRATUM_FIELDS, (
        (e.journal, e.year, e.pi0_hat, e.sd, e.n_obs, e.converged) for e in estimates))


def read_strata(text):
    reader = _rows(text)
    _require(reader, ["journal", "year", "pi0_hat", "n_obs"], "strata CSV")
    out = []
    for i, row in enumerate(reader, start=2):
        try:
            sd = row.get("sd") or None
            out.append(StratumEstimate(
                row["journal"] or None,
                int(row["year"]) if row["year"] else None,
                float(row["pi0_hat"]),
                float(sd) if sd is not None else None,
                int(row["n_obs"]),
                (row.get("converged") or "true") == "true"))
        except (TypeError, ValueError) as exc:
            raise DataError(f"strata CSV line {i}: {exc}") from None
    return out


def read_submissions(text):
    """``{(journal, year): submissions}`` from a journal,year,submissions table."""
    reader = _rows(text)
    _require(reader, ["journal", "year", "submissions"], "submissions table")
    out = {}
    for i, row in enumerate(reader, start=2):
        try:
            out[(row["journal"], int(row["year"]))] = float(row["submissions"])
        except (TypeError, ValueError) as exc:
            raise DataError(f"submissions table line {i}: {exc}") from None
    return out


def csv_kind(text):
    """'records' or 'strata', judged from the header row."""
    fields = next(csv.reader([line for line in text.splitlines() if not line.startswith("#")][:1]), [])
    if "comparison" in fields:
        return "records"
    if "pi0_hat" in fields:
        return "strata"
    raise DataError("input CSV is neither a records table nor a strata table")


def histogram_rows(pairs, alpha=0.05, width=HIST_WIDTH):
    """Counts of reported values in (lo, hi] bins over (0, alpha], by report kind.

    A reported zero lands in the first bin.
    """
    n_bins = int(round(alpha / width))
    counts = [[0, 0, 0] for _ in range(n_bins)]
    for rec, obs in pairs:
        if isinstance(obs, Exact):
            col = 0
        elif isinstance(obs, Rounded):
            col = 1
        elif isinstance(obs, Censored):
            col = 2
        else:
            continue
        k = max(math.ceil(rec.value / width - 1e-9) - 1, 0)
        counts[min(k, n_bins - 1)][col] += 1
    return [(round(k * width, 6), round((k + 1) * width, 6), *c) for k, c in enumerate(counts)]


class AtomicOutputs:
    """Stage files next to their targets; publish all on success, none on failure."""

    def __init__(self):
        self._staged = []

    def write(self, path, text):
        directory = os.path.dirname(os.path.abspath(path))
        fd, tmp = tempfile.mkstemp(prefix=".pvalmix-", dir=directory)
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        self._staged.append((tmp, path))

    def commit(self):
        for tmp, path in self._staged:
            os.replace(tmp, path)
        self._staged = []

    def discard(self):
        for tmp, _ in self._staged:
            with contextlib.suppress(FileNotFoundError):
                os.remove(tmp)
        self._staged = []


@contextlib.contextmanager
def atomic_outputs():
    out = AtomicOutputs()
    try:
        yield out
    except BaseException:
        out.discard()
        raise
    out.commit()
