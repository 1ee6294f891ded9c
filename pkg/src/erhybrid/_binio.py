"""Framing shared by the vector cache and index snapshots.

A frame is: 5-byte magic (4 format bytes + 1 version byte), payload, then a
little-endian CRC32 of everything before it. All integers little-endian.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import CorruptCache, VersionMismatch

_CRC = struct.Struct("<I")


def pack_u16_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("string too long for u16 length prefix")
    return struct.pack("<H", len(raw)) + raw


def seal_frame(magic: bytes, payload: bytes) -> bytes:
    """Prepend the magic and append the checksum."""
    assert len(magic) == 5
    body = magic + payload
    return body + _CRC.pack(zlib.crc32(body))


def open_frame(data: bytes, magic: bytes, what: str) -> bytes:
    """Validate magic, version byte, and checksum; return the payload."""
    assert len(magic) == 5
    if len(data) < len(magic) + _CRC.size:
        raise CorruptCache(f"{what}: file too short")
    if data[:4] != magic[:4]:
        raise CorruptCache(f"{what}: bad magic {data[:5]!r}")
    if data[4] != magic[4]:
        raise VersionMismatch(
            f"{what}: format version {chr(data[4])!r}, expected {chr(magic[4])!r}"
        )
    (stored,) = _CRC.unpack_from(data, len(data) - _CRC.size)
    if zlib.crc32(data[: -_CRC.size]) != stored:
        raise CorruptCache(f"{what}: checksum mismatch")
    return data[len(magic) : -_CRC.size]


class PayloadReader:
    """Cursor over a frame payload; any overrun raises CorruptCache."""

    def __init__(self, payload: bytes, what: str):
        self._data = payload
        self._pos = 0
        self._what = what

    def _take(self, size: int) -> bytes:
        end = self._pos + size
        if end > len(self._data):
            raise CorruptCache(f"{self._what}: truncated payload")
        chunk = self._data[self._pos : end]
        self._pos = end
        return chunk

    def u16(self) -> int:
        return struct.unpack("<H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def f32(self) -> float:
        return struct.unpack("<f", self._take(4))[0]

    def f32_array(self, count: int) -> np.ndarray:
        raw = self._take(4 * count)
        return np.frombuffer(raw, dtype="<f4", count=count).copy()

    def u32_array(self, count: int) -> np.ndarray:
        raw = self._take(4 * count)
        return np.frombuffer(raw, dtype="<u4", count=count).copy()

    def string(self) -> str:
        length = self.u16()
        try:
            return self._take(length).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptCache(f"{self._what}: invalid UTF-8 string") from exc

    def expect_end(self) -> None:
        if self._pos != len(self._data):
            raise CorruptCache(f"{self._what}: {len(self._data) - self._pos} trailing bytes")
