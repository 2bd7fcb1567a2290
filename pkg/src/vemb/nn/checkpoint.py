"""Binary parameter container.

Layout (little-endian): magic ``VEMB``, u32 version, u32 record count, then
per record: u16 name length, UTF-8 name, u8 dtype tag, u8 rank, u64 dims,
raw data. Records are written in name order. The optional manifest is a
JSON document stored as a u8 record named ``__manifest__``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import BadMagicError, FormatError, TruncatedFileError

MAGIC = b"VEMB"
VERSION = 1
MANIFEST_KEY = "__manifest__"

_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("u1"), 3: np.dtype("<i8")}
_TAG_OF = {dt: tag for tag, dt in _TAGS.items()}


def _tag(arr: np.ndarray) -> int:
    dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
    for tag, known in _TAGS.items():
        if dt == known:
            return tag
    raise FormatError(f"unsupported dtype {arr.dtype}")


def dumps(params: dict, manifest: dict | None = None) -> bytes:
    records = {name: np.asarray(arr) for name, arr in params.items()}
    if MANIFEST_KEY in records:
        raise FormatError(f"{MANIFEST_KEY!r} is reserved")
    if manifest is not None:
        text = json.dumps(manifest, sort_keys=True).encode("utf-8")
        records[MANIFEST_KEY] = np.frombuffer(text, dtype=np.uint8)
    out = [MAGIC, struct.pack("<II", VERSION, len(records))]
    for name in sorted(records):
        arr = records[name]
        tag = _tag(arr)
        raw_name = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw_name)) + raw_name)
        out.append(struct.pack("<BB", tag, arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype=_TAGS[tag]).tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedFileError(f"need {n} bytes at offset {self.pos}, file has {len(self.buf)}")
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(buf: bytes):
    """Parse a container; returns ``(params, manifest_or_None)``."""
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError("not a VEMB checkpoint")
    r = _Reader(buf)
    r.take(4)
    version, count = r.unpack("<II")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    params = {}
    manifest = None
    for _ in range(count):
        (n,) = r.unpack("<H")
        name = r.take(n).decode("utf-8")
        tag, rank = r.unpack("<BB")
        if tag not in _TAGS:
            raise FormatError(f"{name}: unknown dtype tag {tag}")
        dims = r.unpack(f"<{rank}Q")
        dtype = _TAGS[tag]
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        arr = np.frombuffer(r.take(size * dtype.itemsize), dtype=dtype).reshape(dims).copy()
        if name == MANIFEST_KEY:
            manifest = json.loads(arr.tobytes().decode("utf-8"))
        else:
            params[name] = arr
    if r.pos != len(buf):
        raise FormatError(f"{len(buf) - r.pos} trailing bytes after {count} records")
    return params, manifest


def save(path, params: dict, manifest: dict | None = None) -> None:
    Path(path).write_bytes(dumps(params, manifest))


def load(path):
    return loads(Path(path).read_bytes())
