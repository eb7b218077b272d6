"""Low-level helpers for the package's binary file formats.

Every mindloop file is little-endian and ends with a 64-bit checksum
(first 8 bytes of the SHA-256 of everything before it). Writers and
readers wrap a file object and keep the running hash in sync so the
trailer is cheap to emit and verify.
"""

from __future__ import annotations

import hashlib
import struct
from typing import BinaryIO

import numpy as np

from .errors import CorruptFile, FormatVersionMismatch

CHECKSUM_LEN = 8


class ChecksumWriter:
    def __init__(self, fh: BinaryIO):
        self._fh = fh
        self._hash = hashlib.sha256()

    def write(self, data: bytes) -> None:
        self._fh.write(data)
        self._hash.update(data)

    def write_u8(self, v: int) -> None:
        self.write(struct.pack("<B", v))

    def write_u16(self, v: int) -> None:
        self.write(struct.pack("<H", v))

    def write_u32(self, v: int) -> None:
        self.write(struct.pack("<I", v))

    def write_f64(self, v: float) -> None:
        self.write(struct.pack("<d", v))

    def write_bytes_block(self, data: bytes) -> None:
        """u32 length prefix followed by the raw bytes."""
        self.write_u32(len(data))
        self.write(data)

    def write_array(self, arr: np.ndarray) -> None:
        """dtype tag, ndim, shape, then raw little-endian values."""
        tag = {"float32": b"f4", "float64": b"f8", "uint8": b"u1",
               "int64": b"i8"}[arr.dtype.name]
        self.write(tag)
        self.write_u8(arr.ndim)
        for dim in arr.shape:
            self.write_u32(dim)
        self.write(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())

    def finish(self) -> None:
        """Append the checksum trailer. Call exactly once."""
        self._fh.write(self._hash.digest()[:CHECKSUM_LEN])


class ChecksumReader:
    def __init__(self, fh: BinaryIO):
        self._fh = fh
        self._hash = hashlib.sha256()

    def read(self, n: int) -> bytes:
        data = self._fh.read(n)
        if len(data) != n:
            raise CorruptFile(f"truncated file: wanted {n} bytes, got {len(data)}")
        self._hash.update(data)
        return data

    def read_u8(self) -> int:
        return struct.unpack("<B", self.read(1))[0]

    def read_u16(self) -> int:
        return struct.unpack("<H", self.read(2))[0]

    def read_u32(self) -> int:
        return struct.unpack("<I", self.read(4))[0]

    def read_f64(self) -> float:
        return struct.unpack("<d", self.read(8))[0]

    def read_bytes_block(self) -> bytes:
        return self.read(self.read_u32())

    def read_array(self) -> np.ndarray:
        dtype = {b"f4": np.float32, b"f8": np.float64, b"u1": np.uint8,
                 b"i8": np.int64}[self.read(2)]
        shape = tuple(self.read_u32() for _ in range(self.read_u8()))
        count = int(np.prod(shape)) if shape else 1
        raw = self.read(count * np.dtype(dtype).itemsize)
        return np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<")).reshape(shape).copy()

    def verify_trailer(self) -> None:
        """Check the trailing checksum and that nothing follows it."""
        expect = self._hash.digest()[:CHECKSUM_LEN]
        got = self._fh.read(CHECKSUM_LEN)
        if len(got) != CHECKSUM_LEN or got != expect:
            raise CorruptFile("checksum mismatch")
        if self._fh.read(1):
            raise CorruptFile("trailing bytes after checksum")


def check_magic_version(rd: ChecksumReader, magic: bytes, supported: int) -> None:
    got = rd.read(len(magic))
    if got != magic:
        raise CorruptFile(f"bad magic {got!r}, expected {magic!r}")
    version = rd.read_u16()
    if version != supported:
        raise FormatVersionMismatch(
            f"format version {version} not supported (reader handles {supported})")
