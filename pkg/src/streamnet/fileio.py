"""MVNT tensor files and MVNW weight files.

MVNT: ``b"MVNT"``, u8 version (1), u8 rank, rank x u32 dims, then the
float32 payload. MVNW: ``b"MVNW"``, u8 version (1), u32 tensor count, then per
tensor a u16 name length, UTF-8 name, u8 rank, rank x u32 dims and float32
payload. All integers and floats are little-endian.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

TENSOR_MAGIC = b"MVNT"
WEIGHTS_MAGIC = b"MVNW"
VERSION = 1
MAX_ELEMENTS = 2**31 - 1
_F32 = np.dtype("<f4")


class FormatError(ValueError):
    """Base class for malformed tensor or weight files."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class TruncatedError(FormatError):
    def __init__(self, what: str, offset: int, expected: int, actual: int):
        super().__init__(f"truncated {what}: expected {expected} bytes, found {actual}", offset)
        self.expected = expected
        self.actual = actual


class DimOverflowError(FormatError):
    pass


class TrailingBytesError(FormatError):
    pass


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        available = len(self.data) - self.pos
        if available < n:
            raise TruncatedError(what, self.pos, n, available)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def header(self, magic: bytes):
        found = self.take(4, "magic")
        if found != magic:
            raise BadMagicError(f"bad magic {found!r}, expected {magic!r}", 0)
        (version,) = self.unpack("<B", "version")
        if version != VERSION:
            raise UnsupportedVersionError(f"unsupported version {version}", 4)

    def array(self, what: str) -> np.ndarray:
        (rank,) = self.unpack("<B", f"{what} rank")
        dims_at = self.pos
        dims = self.unpack(f"<{rank}I", f"{what} dims") if rank else ()
        count = math.prod(dims)
        if count > MAX_ELEMENTS:
            raise DimOverflowError(f"{what} dims {dims} exceed {MAX_ELEMENTS} elements", dims_at)
        payload = self.take(count * 4, f"{what} payload")
        return np.frombuffer(payload, dtype=_F32).astype(np.float32).reshape(dims)

    def finish(self):
        if self.pos != len(self.data):
            raise TrailingBytesError(f"{len(self.data) - self.pos} unexpected trailing bytes", self.pos)


def _array_bytes(array: np.ndarray) -> bytes:
    array = np.asarray(array, dtype=np.float32)
    if array.ndim > 255:
        raise ValueError("rank must fit in a u8")
    if any(d > 0xFFFFFFFF for d in array.shape):
        raise ValueError(f"dims {array.shape} do not fit in u32")
    head = struct.pack("<B", array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape)
    return head + np.ascontiguousarray(array, dtype=_F32).tobytes()


def encode_tensor(array: np.ndarray) -> bytes:
    return TENSOR_MAGIC + struct.pack("<B", VERSION) + _array_bytes(array)


def decode_tensor(data: bytes) -> np.ndarray:
    reader = _Reader(data)
    reader.header(TENSOR_MAGIC)
    array = reader.array("tensor")
    reader.finish()
    return array


def encode_weights(weights: dict) -> bytes:
    parts = [WEIGHTS_MAGIC, struct.pack("<BI", VERSION, len(weights))]
    for name, array in weights.items():
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"parameter name too long: {name[:40]}...")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(_array_bytes(array))
    return b"".join(parts)


def decode_weights(data: bytes) -> dict:
    reader = _Reader(data)
    reader.header(WEIGHTS_MAGIC)
    (count,) = reader.unpack("<I", "tensor count")
    weights = {}
    for k in range(count):
        (length,) = reader.unpack("<H", f"tensor {k} name length")
        name_at = reader.pos
        try:
            name = reader.take(length, f"tensor {k} name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"tensor {k} name is not UTF-8", name_at) from None
        if name in weights:
            raise FormatError(f"duplicate tensor name {name!r}", name_at)
        weights[name] = reader.array(f"tensor {name!r}")
    reader.finish()
    return weights


def load_tensor(path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())


def save_tensor(path, array: np.ndarray):
    Path(path).write_bytes(encode_tensor(array))


def load_video_tensor(path) -> np.ndarray:
    """Load an MVNT file that must hold a (T, H, W, C) video."""
    array = load_tensor(path)
    if array.ndim != 4 or min(array.shape, default=0) < 1:
        raise FormatError(f"expected a rank-4 video tensor with positive dims, got shape {array.shape}", 5)
    return array


def load_weights(path) -> dict:
    return decode_weights(Path(path).read_bytes())


def save_weights(path, weights: dict):
    Path(path).write_bytes(encode_weights(weights))
