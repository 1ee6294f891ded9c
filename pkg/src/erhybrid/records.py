"""Account records: the unit being resolved.

A record is an id plus five canonical string fields. Records arrive as CSV or
JSONL, get normalized, and are serialized into a fixed English sentence before
embedding. The sentence template is frozen; every provider and cache key
assumes it.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import os
from dataclasses import dataclass, field

from .errors import DuplicateId, MalformedInput, MissingColumn

CANONICAL_FIELDS = ("username", "email", "domain", "servername", "status")

ID_COLUMN = "record_id"

TEMPLATE = (
    "The username {username} with email {email} and domain {domain} "
    "on {servername} has {status} status."
)


class Source(enum.Enum):
    REFERENCE = "reference"
    QUERY = "query"


@dataclass(frozen=True)
class Record:
    """One account record. `fields` holds exactly the canonical field names."""

    record_id: str
    source: Source
    fields: dict[str, str] = field(default_factory=dict)

    def field_value(self, name: str) -> str:
        return self.fields.get(name, "")


def normalize(record: Record) -> Record:
    """Return a copy with whitespace stripped and status lowercased.

    Only `status` is case-folded; usernames, emails, and hostnames keep their
    case because the verifier compares them case-insensitively anyway and the
    serialized sentence should read like the input. Missing fields become
    empty strings so downstream code never sees a partial dict.
    """
    cleaned = {}
    for name in CANONICAL_FIELDS:
        value = record.fields.get(name, "").strip()
        if name == "status":
            value = value.lower()
        cleaned[name] = value
    return Record(record_id=record.record_id, source=record.source, fields=cleaned)


def serialize(record: Record) -> str:
    """Render the record as the fixed embedding sentence.

    Missing fields render as empty strings, leaving the connector words in
    place, so the output is total over all records.
    """
    values = {name: record.fields.get(name, "") for name in CANONICAL_FIELDS}
    return TEMPLATE.format(**values)


def _required_columns() -> tuple[str, ...]:
    return (ID_COLUMN,) + CANONICAL_FIELDS


def _build_record(
    raw: dict[str, str], source: Source, where: str
) -> Record:
    record_id = raw[ID_COLUMN].strip()
    if not record_id:
        raise MalformedInput(f"{where}: empty record_id")
    fields = {name: raw[name] for name in CANONICAL_FIELDS}
    return Record(record_id=record_id, source=source, fields=fields)


def parse_csv(path: str | os.PathLike[str], source: Source) -> list[Record]:
    """Parse records from a CSV file with a header row.

    The header must contain record_id plus the five canonical columns; extra
    columns are ignored. A file with only the header yields an empty list.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _parse_csv_stream(fh, source, str(path))


def _parse_csv_stream(fh: io.TextIOBase, source: Source, name: str) -> list[Record]:
    reader = csv.DictReader(fh)
    if reader.fieldnames is None:
        raise MalformedInput(f"{name}: no header row")
    for column in _required_columns():
        if column not in reader.fieldnames:
            raise MissingColumn(f"{name}: missing column {column!r}")
    records: list[Record] = []
    seen: set[str] = set()
    for row in reader:
        line = reader.line_num
        if row.get(None) is not None or any(
            row.get(col) is None for col in _required_columns()
        ):
            raise MalformedInput(f"{name}:{line}: wrong number of fields")
        record = _build_record(row, source, f"{name}:{line}")
        if record.record_id in seen:
            raise DuplicateId(f"{name}:{line}: duplicate record_id {record.record_id!r}")
        seen.add(record.record_id)
        records.append(record)
    return records


def parse_jsonl(path: str | os.PathLike[str], source: Source) -> list[Record]:
    """Parse records from a file of one JSON object per line.

    Blank lines are skipped. Every object needs record_id and the canonical
    fields as strings; anything else raises with the offending line number.
    """
    records: list[Record] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_num, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{line_num}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedInput(f"{where}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise MalformedInput(f"{where}: expected a JSON object")
            for column in _required_columns():
                if column not in obj:
                    raise MissingColumn(f"{where}: missing key {column!r}")
                if not isinstance(obj[column], str):
                    raise MalformedInput(f"{where}: key {column!r} is not a string")
            record = _build_record(obj, source, where)
            if record.record_id in seen:
                raise DuplicateId(f"{where}: duplicate record_id {record.record_id!r}")
            seen.add(record.record_id)
            records.append(record)
    return records


def write_csv(records: list[Record], path: str | os.PathLike[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_required_columns())
        for record in records:
            writer.writerow(
                [record.record_id] + [record.fields.get(f, "") for f in CANONICAL_FIELDS]
            )


def write_jsonl(records: list[Record], path: str | os.PathLike[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            obj = {ID_COLUMN: record.record_id}
            obj.update({f: record.fields.get(f, "") for f in CANONICAL_FIELDS})
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
