"""Wire serialization: length-prefixed JSON frames and line-delimited logs.

Every frame is a canonical JSON object (sorted keys, compact separators)
encoded as UTF-8.  On byte streams frames are prefixed with a 4-byte
big-endian payload length; in log files the same records are written one per
line.  Canonical encoding keeps runs with identical seeds byte-identical.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Iterator

from .errors import InputError

_LEN = struct.Struct(">I")


def dumps_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=False)


def encode_frame(record: dict) -> bytes:
    payload = dumps_record(record).encode("utf-8")
    return _LEN.pack(len(payload)) + payload


def decode_frames(data: bytes) -> Iterator[dict]:
    """Yield all complete frames in a buffer; trailing partial data is an error."""
    offset = 0
    while offset < len(data):
        if offset + _LEN.size > len(data):
            raise InputError("truncated frame header")
        (length,) = _LEN.unpack_from(data, offset)
        offset += _LEN.size
        if offset + length > len(data):
            raise InputError("truncated frame payload")
        yield json.loads(data[offset : offset + length].decode("utf-8"))
        offset += length


def command_frames(tick: int, command_records: Iterable[dict]) -> bytes:
    """Length-prefixed frames for a tick's device commands (emulator/UI feed)."""
    out = b""
    for record in command_records:
        out += encode_frame({"tick": tick, **record})
    return out


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(dumps_record(record))
            fh.write("\n")


def read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
