"""Minimal ``key = value`` text format shared by profiles and bench configs.

One assignment per line; ``#`` starts a comment; blank lines are ignored.
Keys are lower-case identifiers. The canonical serialization is one
``key = value`` line per field in a fixed field order, so a load/serialize
round trip is byte-identical up to whitespace and comments.
"""

from __future__ import annotations

from typing import Iterable, Mapping


class KvParseError(ValueError):
    def __init__(self, message: str, line_no: int, source: str):
        super().__init__(f"{source}:{line_no}: {message}")
        self.line_no = line_no
        self.source = source


def parse_kv_text(text: str, source: str = "<string>") -> dict[str, str]:
    entries: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise KvParseError(f"expected 'key = value', got {raw.strip()!r}", line_no, source)
        key, value = line.split("=", 1)
        key = key.strip().lower()
        value = value.strip()
        if not key.replace("_", "").isalnum():
            raise KvParseError(f"invalid key {key!r}", line_no, source)
        if key in entries:
            raise KvParseError(f"duplicate key {key!r}", line_no, source)
        entries[key] = value
    return entries


def serialize_kv(pairs: Iterable[tuple[str, object]]) -> str:
    return "".join(f"{key} = {value}\n" for key, value in pairs)


def parse_float(entries: Mapping[str, str], key: str, source: str) -> float:
    try:
        return float(entries[key])
    except ValueError as exc:
        raise KvParseError(f"field {key!r}: not a number: {entries[key]!r}", 0, source) from exc


def parse_int(entries: Mapping[str, str], key: str, source: str) -> int:
    raw = entries[key]
    try:
        value = float(raw)
    except ValueError as exc:
        raise KvParseError(f"field {key!r}: not a number: {raw!r}", 0, source) from exc
    if value != int(value):
        raise KvParseError(f"field {key!r}: expected an integer, got {raw!r}", 0, source)
    return int(value)
