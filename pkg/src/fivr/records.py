"""Field-named text records.

The wire and fixture format used across the toolkit: records are blocks of
``key: value`` lines separated by ``---`` lines.  Repeated keys within one
record aggregate into a list, preserving order.  This module is the single
codec for that format; event listings and the HTTP API both speak it.
"""

from __future__ import annotations

import re

RECORD_SEPARATOR = "---"

_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

FieldValue = "str | list[str]"
Record = dict


class ParseError(ValueError):
    """Raised for malformed record text; carries the offending line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def decode(text: str) -> list[dict[str, str | list[str]]]:
    """Parse record text into a list of field dicts.

    Blank lines are ignored.  A line that is neither blank, a separator,
    nor ``key: value`` shaped raises :class:`ParseError` with its line
    number.  Sections with no fields (e.g. a trailing separator) are
    dropped.
    """
    records: list[dict[str, str | list[str]]] = []
    current: dict[str, str | list[str]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if line.strip() == RECORD_SEPARATOR:
            if current:
                records.append(current)
                current = {}
            continue
        if not line.strip():
            continue
        if ":" not in line:
            raise ParseError(f"expected 'key: value', got {line!r}", line_no)
        key, _, value = line.partition(":")
        key = key.strip()
        if not _KEY_RE.match(key):
            raise ParseError(f"bad field name {key!r}", line_no)
        value = value.strip()
        if key in current:
            existing = current[key]
            if isinstance(existing, list):
                existing.append(value)
            else:
                current[key] = [existing, value]
        else:
            current[key] = value
    if current:
        records.append(current)
    return records


def encode(records: list[dict[str, str | list[str]]]) -> str:
    """Serialize records to text, one ``key: value`` line per field.

    Records are joined with ``---`` lines and the output ends with a
    newline.  Values containing newlines and malformed keys are rejected
    rather than silently corrupting the stream.
    """
    blocks: list[str] = []
    for record in records:
        lines: list[str] = []
        for key, value in record.items():
            if not _KEY_RE.match(key):
                raise ValueError(f"bad field name {key!r}")
            values = value if isinstance(value, list) else [value]
            for item in values:
                item = str(item)
                if "\n" in item or "\r" in item:
                    raise ValueError(f"field {key!r} value contains a newline")
                lines.append(f"{key}: {item}")
        blocks.append("\n".join(lines))
    return f"\n{RECORD_SEPARATOR}\n".join(blocks) + "\n"
