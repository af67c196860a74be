"""Canonical byte encoding shared by every hashed or signed structure.

Integers are big-endian and fixed width, variable-size fields carry a
4-byte length prefix, and optional fields carry a one-byte presence flag.
Together these make every encoder below an injection.
"""

from __future__ import annotations

MAX_U256 = (1 << 256) - 1


class DecodeError(ValueError):
    pass


def u8(n: int) -> bytes:
    return n.to_bytes(1, "big")


def u32(n: int) -> bytes:
    return n.to_bytes(4, "big")


def u64(n: int) -> bytes:
    return n.to_bytes(8, "big")


def u256(n: int) -> bytes:
    if not 0 <= n <= MAX_U256:
        raise ValueError(f"value out of 256-bit range: {n}")
    return n.to_bytes(32, "big")


def lp(data: bytes) -> bytes:
    """Length-prefix ``data``."""
    return u32(len(data)) + data


def opt(data: bytes | None) -> bytes:
    if data is None:
        return b"\x00"
    return b"\x01" + data


def word_to_int(word: bytes) -> int:
    return int.from_bytes(word, "big")


class Reader:
    """Cursor over a byte string; every read is bounds-checked."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise DecodeError(f"truncated input at offset {self.pos} (wanted {n} bytes)")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "big")

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "big")

    def u256(self) -> int:
        return int.from_bytes(self.take(32), "big")

    def lp(self) -> bytes:
        return self.take(self.u32())

    def flag(self) -> bool:
        b = self.u8()
        if b not in (0, 1):
            raise DecodeError(f"bad presence flag {b}")
        return b == 1

    def expect(self, prefix: bytes) -> None:
        got = self.take(len(prefix))
        if got != prefix:
            raise DecodeError(f"expected {prefix!r}, got {got!r}")

    def done(self) -> None:
        if self.pos != len(self.data):
            raise DecodeError(f"{len(self.data) - self.pos} trailing bytes")
