"""Find "P = x", "P < x" and "P <= x" reports in abstract text and classify them.

The grammar accepts ``P`` or ``p``, optional whitespace around the comparator,
``=``, ``<``, ``<=``, ``=<``, ``≤`` and ``⩽``, plain decimals (including a
leading dot and the mid-dot decimal separator some journals print), and
scientific notation written as ``1.3e-4``, ``1.3×10-4``, ``1.3×10^-4`` or
``1.3 x 10-4``.
"""

import json
import re
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Optional, Union

from .model import DEFAULT_ALPHA, Censored, Exact, Rounded, rounding_bins

EQUALS, LESS, LEQ = "equals", "less", "leq"

_COMPARATORS = {"=": EQUALS, "<": LESS, "<=": LEQ, "=<": LEQ, "≤": LEQ, "⩽": LEQ}
_MINUS = r"\-−–‐‑"
_SUPERSCRIPT = str.maketrans("⁻⁰¹²³⁴⁵⁶⁷⁸⁹",
                             "-0123456789")

_HSPACE = r"[^\S\r\n]"
_PHRASE = re.compile(rf"(?<![A-Za-z0-9_])([Pp]){_HSPACE}*(<=|=<|≤|⩽|<|=){_HSPACE}*")
_DECIMAL = r"(?:\d+(?:[.·]\d+)?|[.·]\d+)"
_NUMBER = re.compile(
    rf"(?P<mant>{_DECIMAL})"
    r"(?:"
    rf"(?P<e>[eE][{_MINUS}]?\d+)"
    r"|"
    rf"(?P<times>{_HSPACE}?[×xX*·]{_HSPACE}?10{_HSPACE}?\^?{_HSPACE}?"
    rf"(?P<texp>[{_MINUS}⁻]{_HSPACE}?[\d⁰¹²³⁴-⁹]+))"
    r")?"
    r"(?![\d.·]*\d)"
)

ABOVE_THRESHOLD = "above-threshold"
NONPOSITIVE_BOUND = "nonpositive-bound"
NONPOSITIVE_VALUE = "nonpositive-value"


@dataclass(frozen=True)
class AbstractDoc:
    id: str
    journal: str
    year: int
    text: str

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("document id must be a nonempty string")
        if not isinstance(self.year, int) or not 1900 <= self.year <= 2100:
            raise ValueError(f"year out of range: {self.year!r}")
        if not isinstance(self.text, str) or not isinstance(self.journal, str):
            raise ValueError("journal and text must be strings")


@dataclass(frozen=True)
class PValueRecord:
    doc_id: str
    journal: str
    year: int
    comparison: str
    value: float
    raw_span: str


@dataclass(frozen=True)
class Excluded:
    reason: str


Classified = Union[Exact, Censored, Rounded, Excluded]


def _mantissa_text(token):
    return token.replace("·", ".")


def parse_number(token):
    """Numeric value of a matched number token, or None."""
    m = _NUMBER.fullmatch(token)
    if m is None:
        return None
    mant = _mantissa_text(m.group("mant"))
    if m.group("e"):
        return float(f"{mant}e{_ascii_exp(m.group('e')[1:])}")
    if m.group("times"):
        return float(f"{mant}e{_ascii_exp(m.group('texp'))}")
    return float(mant)


def _ascii_exp(text):
    text = text.translate(_SUPERSCRIPT)
    text = re.sub(rf"[\s{_MINUS}]", lambda c: "" if c.group().isspace() else "-", text)
    return text


def scan(text):
    """Yield ``(comparison, value, raw_span, number_token)`` in text order.

    Phrases with no parseable number after them yield ``value=None``.
    """
    for m in _PHRASE.finditer(text):
        num = _NUMBER.match(text, m.end())
        comparison = _COMPARATORS[m.group(2)]
        if num is None or not num.group(0):
            yield comparison, None, m.group(0), None
            continue
        token = num.group(0)
        yield comparison, parse_number(token), text[m.start():num.end()], token


def extract_pvalues(doc, diagnostics=None):
    """All P-value reports in ``doc.text``, in document order.

    ``diagnostics`` (a Counter) receives an ``unparseable`` tally for phrases
    not followed by a number.
    """
    records = []
    for comparison, value, span, _ in scan(doc.text):
        if value is None:
            if diagnostics is not None:
                diagnostics["unparseable"] += 1
            continue
        records.append(PValueRecord(doc.id, doc.journal, doc.year, comparison, value, span))
    return records


def number_token(raw_span):
    """The printed number inside a matched span."""
    m = _PHRASE.match(raw_span)
    start = m.end() if m else 0
    num = _NUMBER.match(raw_span, start)
    return num.group(0) if num else raw_span[start:].strip()


def _round_bin(token, value, alpha):
    # round values are plain decimals with at most two significant decimal places
    m = _NUMBER.fullmatch(token)
    if m is None or m.group("e") or m.group("times"):
        return None
    mant = _mantissa_text(m.group("mant"))
    decimals = mant.split(".")[1].rstrip("0") if "." in mant else ""
    if len(decimals) > 2:
        return None
    return rounding_bins(alpha).bin_of_value(value)


def classify(record, alpha=DEFAULT_ALPHA) -> Classified:
    value = record.value
    if record.comparison in (LESS, LEQ):
        if value <= 0.0:
            return Excluded(NONPOSITIVE_BOUND)
        if value > alpha:
            return Excluded(ABOVE_THRESHOLD)
        return Censored(value, strict=record.comparison == LESS)
    k = _round_bin(number_token(record.raw_span), value, alpha)
    if k is not None:
        return Rounded(k)
    if value > alpha:
        return Excluded(ABOVE_THRESHOLD)
    if value <= 0.0:
        return Excluded(NONPOSITIVE_VALUE)
    return Exact(value)


def parse_doc(obj) -> Optional[AbstractDoc]:
    """AbstractDoc from a decoded JSON object, or None if malformed."""
    try:
        year = obj["year"]
        if isinstance(year, str) and year.strip().isdigit():
            year = int(year)
        return AbstractDoc(str(obj["id"]) if obj["id"] is not None else "", obj["journal"],
                           year, obj["text"])
    except (KeyError, TypeError, ValueError):
        return None


def read_jsonl(lines, diagnostics):
    """AbstractDocs from JSON lines; bad lines are counted, not raised."""
    for line in lines:
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            diagnostics["malformed"] += 1
            continue
        doc = parse_doc(obj) if isinstance(obj, dict) else None
        if doc is None:
            diagnostics["malformed"] += 1
            continue
        yield doc


def _median_abs_dev(values):
    med = statistics.median(values)
    return statistics.median(abs(v - med) for v in values)


def ingest_corpus(docs, alpha=DEFAULT_ALPHA, diagnostics=None):
    """Extract and classify every report in a stream of documents.

    Items of ``docs`` are AbstractDocs or raw dicts (malformed dicts are
    skipped and counted). Returns ``(pairs, diagnostics)`` where ``pairs`` is
    a list of ``(PValueRecord, classification)``.
    """
    counts = diagnostics if diagnostics is not None else Counter()
    counts.setdefault("malformed", 0)
    counts.setdefault("unparseable", 0)
    pairs = []
    per_doc = []
    n_docs = 0
    by_journal = defaultdict(lambda: {"records": 0, "at_most_alpha": 0})
    by_year = defaultdict(int)
    kinds = Counter()
    for doc in docs:
        if not isinstance(doc, AbstractDoc):
            doc = parse_doc(doc) if isinstance(doc, dict) else None
            if doc is None:
                counts["malformed"] += 1
                continue
        n_docs += 1
        records = extract_pvalues(doc, counts)
        if records:
            per_doc.append(len(records))
        for rec in records:
            obs = classify(rec, alpha)
            pairs.append((rec, obs))
            stats = by_journal[rec.journal]
            stats["records"] += 1
            stats["at_most_alpha"] += rec.value <= alpha
            by_year[rec.year] += 1
            kinds[obs.reason if isinstance(obs, Excluded) else type(obs).__name__.lower()] += 1

    journals = {}
    for name in sorted(by_journal):
        s = by_journal[name]
        journals[name] = {
            "records": s["records"],
            "fraction_at_most_alpha": s["at_most_alpha"] / s["records"],
        }
    report = {
        "documents": n_docs,
        "documents_with_pvalues": len(per_doc),
        "records": len(pairs),
        "malformed_documents": counts["malformed"],
        "unparseable_phrases": counts["unparseable"],
        "fraction_at_most_alpha": (sum(r.value <= alpha for r, _ in pairs) / len(pairs)) if pairs else None,
        "median_pvalues_per_reporting_document": statistics.median(per_doc) if per_doc else None,
        "mad_pvalues_per_reporting_document": _median_abs_dev(per_doc) if per_doc else None,
        "classification": {k: kinds[k] for k in sorted(kinds)},
        "by_journal": journals,
        "by_year": {str(y): by_year[y] for y in sorted(by_year)},
    }
    return pairs, report
