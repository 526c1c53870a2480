"""Little-endian binary file helpers shared by the on-disk formats."""

from __future__ import annotations

import struct

import numpy as np


class FormatError(ValueError):
    """Raised when a binary file does not match its declared format."""


class ByteReader:
    """Sequential reader over bytes with bounds checking."""

    def __init__(self, data: bytes, label: str = "stream"):
        self.data = data
        self.pos = 0
        self.label = label

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"{self.label}: truncated at byte {self.pos}, wanted {n} more"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def magic(self, expected: bytes) -> None:
        got = self.take(len(expected))
        if got != expected:
            raise FormatError(
                f"{self.label}: bad magic {got!r}, expected {expected!r}"
            )

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f32(self) -> float:
        return struct.unpack("<f", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def string16(self) -> str:
        length = self.u16()
        return self.take(length).decode("utf-8")

    def f32_array(self, count: int) -> np.ndarray:
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4").copy()

    def f64_array(self, count: int) -> np.ndarray:
        raw = self.take(8 * count)
        return np.frombuffer(raw, dtype="<f8").copy()

    def expect_end(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(
                f"{self.label}: {len(self.data) - self.pos} trailing bytes"
            )


class ByteWriter:
    """Builds a bytes payload with the little-endian conventions above."""

    def __init__(self):
        self.parts: list[bytes] = []

    def raw(self, data: bytes) -> None:
        self.parts.append(data)

    def u16(self, value: int) -> None:
        self.parts.append(struct.pack("<H", value))

    def u32(self, value: int) -> None:
        self.parts.append(struct.pack("<I", value))

    def f64(self, value: float) -> None:
        self.parts.append(struct.pack("<d", value))

    def string16(self, text: str) -> None:
        encoded = text.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValueError(f"string too long to encode: {len(encoded)} bytes")
        self.u16(len(encoded))
        self.parts.append(encoded)

    def f32_array(self, array: np.ndarray) -> None:
        self.parts.append(np.ascontiguousarray(array, dtype="<f4").tobytes())

    def f64_array(self, array: np.ndarray) -> None:
        self.parts.append(np.ascontiguousarray(array, dtype="<f8").tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self.parts)
