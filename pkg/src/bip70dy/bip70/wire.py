"""Canonical binary encoding.

Every field is written as a 4-byte big-endian length followed by its bytes,
in declaration order.  Integers are 8-byte big-endian two's complement,
strings UTF-8, lists a 4-byte count followed by their encoded items, and
structured values (anything with ``wire_fields()``) the encoding of their
fields.  ``None`` encodes as an empty list, so optional values stay
unambiguous.
"""
from __future__ import annotations

import struct
from typing import Any

__all__ = ["encode", "encode_value"]


def _frame(body: bytes) -> bytes:
    return struct.pack(">I", len(body)) + body


def encode_value(v: Any) -> bytes:
    if isinstance(v, bool):
        return _frame(b"\x01" if v else b"\x00")
    if isinstance(v, int):
        return _frame(v.to_bytes(8, "big", signed=True))
    if isinstance(v, (bytes, bytearray)):
        return _frame(bytes(v))
    if isinstance(v, str):
        return _frame(v.encode("utf-8"))
    if v is None:
        return _frame(struct.pack(">I", 0))
    if isinstance(v, (list, tuple)):
        return _frame(struct.pack(">I", len(v)) + b"".join(encode_value(x) for x in v))
    if hasattr(v, "wire_fields"):
        return _frame(encode(*v.wire_fields()))
    raise TypeError(f"cannot encode {type(v).__name__}")


def encode(*fields: Any) -> bytes:
    return b"".join(encode_value(f) for f in fields)
