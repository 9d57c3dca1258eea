"""Line-delimited record files: one JSON object per line, UTF-8, ``\\n``.

Every record carries a ``schema_version`` field. Readers reject unknown
versions and ignore unknown extra fields, so formats can grow additively.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import MalformedRecord, UnsupportedSchema

SCHEMA_VERSION = 1


def dump_record(record: dict[str, Any]) -> str:
    """Serialize one record with stable field order (insertion order)."""
    return json.dumps(record, ensure_ascii=False)


def write_records(path: str | Path, records: Iterable[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(dump_record(record))
            fh.write("\n")


def read_records(path: str | Path, expected_version: int = SCHEMA_VERSION) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield ``(line_no, record)`` pairs, validating schema_version per line."""
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, str(exc)) from exc
            if not isinstance(record, dict):
                raise MalformedRecord(line_no, "record is not an object")
            version = record.get("schema_version")
            if version != expected_version:
                raise UnsupportedSchema(version, expected_version)
            yield line_no, record


def require_fields(record: dict[str, Any], line_no: int, *fields: str) -> None:
    for field in fields:
        if field not in record:
            raise MalformedRecord(line_no, f"missing field {field!r}")
