"""Linear string format for record sets, and its inverse parser.

Triplesets render as "s : p : o | s : p : o | ...". MR sets render each pair
as "k : v" with the common-subject pair placed first, e.g.
"name : The Golden Curry | food : English | ...". The inverse parser exists
because text-to-data model output arrives as linearized strings and must be
interpreted even when partially malformed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DelinearizeError, LinearizationError, RecordFieldError
from .records import (
    FIELD_SEP,
    RECORD_SEP,
    Mr,
    Record,
    RecordKind,
    RecordSet,
    Triple,
    normalize_text,
)


@dataclass(frozen=True)
class LinearFormat:
    record_sep: str = RECORD_SEP
    field_sep: str = FIELD_SEP
    subject_key: str = "name"  # MR sets only

    def __post_init__(self):
        if not self.record_sep or not self.field_sep:
            raise LinearizationError("separators must be non-empty")
        if self.record_sep == self.field_sep:
            raise LinearizationError("record and field separators must differ")


DEFAULT_FORMAT = LinearFormat()


@dataclass(frozen=True)
class DelinearizeResult:
    """Parsed record set plus the number of malformed segments dropped."""

    record_set: RecordSet
    dropped: int


def _check_collision(fields: tuple[str, ...], fmt: LinearFormat) -> None:
    for f in fields:
        if fmt.record_sep in f or fmt.field_sep in f:
            raise LinearizationError(
                f"field {f!r} collides with a separator of the linear format"
            )


def _subject_index(rs: RecordSet, fmt: LinearFormat) -> int:
    matches = [
        i for i, r in enumerate(rs.records) if r.key.casefold() == fmt.subject_key.casefold()
    ]
    if len(matches) != 1:
        raise LinearizationError(
            f"MR set must contain the subject pair {fmt.subject_key!r} exactly once, "
            f"found {len(matches)}"
        )
    return matches[0]


def render_records(records, fmt: LinearFormat = DEFAULT_FORMAT) -> str:
    """Join records in the given order without structural validation."""
    return fmt.record_sep.join(fmt.field_sep.join(r.fields) for r in records)


def linearize(rs: RecordSet, fmt: LinearFormat = DEFAULT_FORMAT) -> str:
    """Render a valid record set in the linear string format.

    For MR sets the common-subject pair is moved to the front; everything
    else keeps its original order.
    """
    if rs.is_empty:
        raise LinearizationError("cannot linearize an empty record set")
    for r in rs.records:
        _check_collision(r.fields, fmt)
    if rs.kind is RecordKind.MR_SET:
        si = _subject_index(rs, fmt)
        ordered = (rs.records[si],) + rs.records[:si] + rs.records[si + 1 :]
        return render_records(ordered, fmt)
    return render_records(rs.records, fmt)


def delinearize(
    t: str, kind: RecordKind, fmt: LinearFormat = DEFAULT_FORMAT
) -> DelinearizeResult:
    """Parse a linearized string back into a record set.

    Input may be arbitrary model output: segments that do not split into the
    exact field count for `kind` are dropped and counted, never fabricated.
    Raises DelinearizeError (carrying the drop count) when nothing parses.
    """
    n_fields = 3 if kind is RecordKind.TRIPLESET else 2
    make = Triple if kind is RecordKind.TRIPLESET else Mr
    records: list[Record] = []
    dropped = 0
    text = normalize_text(t)
    segments = text.split(fmt.record_sep) if text else []
    for seg in segments:
        fields = [normalize_text(f) for f in seg.split(fmt.field_sep)]
        if len(fields) != n_fields or not all(fields):
            dropped += 1
            continue
        try:
            records.append(make(*fields))
        except RecordFieldError:
            dropped += 1
    if not records:
        raise DelinearizeError(
            f"no parseable {kind.value} segment in {t!r} ({dropped} dropped)",
            dropped=dropped,
        )
    return DelinearizeResult(RecordSet(tuple(records), kind), dropped)


def extract_source_values(rs: RecordSet) -> tuple[str, ...]:
    """Values a generated target is expected to contain, in first-occurrence
    order: subjects and objects for triplesets, the subject name and all
    values for MR sets. Predicates and keys are not source values.
    """
    out: list[str] = []
    seen: set[str] = set()

    def add(v: str) -> None:
        k = v.casefold()
        if k not in seen:
            seen.add(k)
            out.append(v)

    for r in rs.records:
        if isinstance(r, Triple):
            add(r.subject)
            add(r.object)
        else:
            add(r.value)
    return tuple(out)
