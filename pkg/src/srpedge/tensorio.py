"""Binary tensor container used for network weights and SRP/feature dumps.

Layout (all little-endian)::

    b"C3DE"  u32 version
    u32 n_fields   { u16 len, utf-8 key, i64 value } * n_fields      # config echo
    u32 n_tensors  { u16 len, utf-8 name, u8 dtype, u8 rank, u32 dim * rank } * n_tensors
    payloads in directory order
    u32 CRC32 of every preceding byte
"""
from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"C3DE"
VERSION = 1
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("<i4"), 4: np.dtype("<i8")}
_CODES = {v: k for k, v in _DTYPES.items()}


class ChecksumError(ValueError):
    pass


class VersionError(ValueError):
    pass


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def encode(tensors: dict, fields: dict | None = None) -> bytes:
    fields = fields or {}
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(fields))]
    for key, value in fields.items():
        parts += [_pack_str(key), struct.pack("<q", int(value))]
    parts.append(struct.pack("<I", len(tensors)))
    payloads = []
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        dt = arr.dtype.newbyteorder("<")
        if dt not in _CODES:
            raise TypeError(f"{name}: unsupported dtype {arr.dtype}")
        parts += [_pack_str(name), struct.pack("<BB", _CODES[dt], arr.ndim), struct.pack(f"<{arr.ndim}I", *arr.shape)]
        payloads.append(np.ascontiguousarray(arr, dtype=dt).tobytes())
    body = b"".join(parts + payloads)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise ChecksumError("file truncated")
        out = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return out

    def string(self) -> str:
        (n,) = self.take("<H")
        raw = self.buf[self.pos : self.pos + n]
        self.pos += n
        return raw.decode("utf-8")


def decode(buf: bytes) -> tuple[dict, dict]:
    if len(buf) < 12 or buf[:4] != MAGIC:
        raise ValueError("not a C3DE tensor file")
    body, (crc,) = buf[:-4], struct.unpack("<I", buf[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumError("CRC32 mismatch: file is corrupt or truncated")
    r = _Reader(body)
    r.pos = 4
    (version,) = r.take("<I")
    if version != VERSION:
        raise VersionError(f"unsupported tensor file version {version} (expected {VERSION})")
    (n_fields,) = r.take("<I")
    fields = {}
    for _ in range(n_fields):
        key = r.string()
        (fields[key],) = r.take("<q")
    (n_tensors,) = r.take("<I")
    directory = []
    for _ in range(n_tensors):
        name = r.string()
        code, rank = r.take("<BB")
        dims = r.take(f"<{rank}I") if rank else ()
        directory.append((name, _DTYPES[code], dims))
    tensors = {}
    for name, dt, dims in directory:
        count = int(np.prod(dims, dtype=np.int64))
        nbytes = count * dt.itemsize
        if r.pos + nbytes > len(body):
            raise ChecksumError(f"payload for {name} truncated")
        tensors[name] = np.frombuffer(body, dtype=dt, count=count, offset=r.pos).reshape(dims).copy()
        r.pos += nbytes
    return tensors, fields


def write(path, tensors: dict, fields: dict | None = None) -> None:
    Path(path).write_bytes(encode(tensors, fields))


def read(path) -> tuple[dict, dict]:
    return decode(Path(path).read_bytes())
