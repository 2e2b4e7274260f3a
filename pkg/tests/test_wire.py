"""Frame encoding, log files, and cross-run byte stability."""

import pytest

from ergoguide.errors import InputError
from ergoguide.wire import (
    command_frames,
    decode_frames,
    dumps_record,
    encode_frame,
    read_jsonl,
    write_jsonl,
)


def test_frame_roundtrip():
    records = [
        {"tick": 0, "device_id": "torso_front", "level": "l3", "lambda": 1.0,
         "duration_ms": 400, "onset_ms": 0},
        {"tick": 1, "device_id": "torso_back", "level": "l1", "lambda": 0.33,
         "duration_ms": 400, "onset_ms": 0},
    ]
    blob = b"".join(encode_frame(r) for r in records)
    assert list(decode_frames(blob)) == records


def test_truncated_frame_detected():
    blob = encode_frame({"a": 1})
    with pytest.raises(InputError):
        list(decode_frames(blob[:-2]))


def test_canonical_encoding_is_stable():
    record = {"b": 1, "a": [1.5, 0.1], "c": {"y": None, "x": "s"}}
    assert dumps_record(record) == dumps_record(dict(reversed(record.items())))


def test_command_frames_carry_tick():
    frames = command_frames(7, [{"device_id": "x", "lambda": 0.5}])
    decoded = list(decode_frames(frames))
    assert decoded == [{"tick": 7, "device_id": "x", "lambda": 0.5}]


def test_jsonl_roundtrip(tmp_path):
    path = tmp_path / "log.jsonl"
    records = [{"type": "meta", "seed": 1}, {"type": "tick", "t": 0.1}]
    write_jsonl(path, records)
    assert read_jsonl(path) == records
