"""Binary embedding file.

Layout (little-endian): magic ``VEC1``, u32 count, u32 dim, then per record
a u16 id length, the UTF-8 id and ``dim`` float32 values.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import BadMagicError, FormatError, TruncatedFileError

MAGIC = b"VEC1"


def dumps(records) -> bytes:
    """``records`` is a sequence of ``(id, vector)`` pairs sharing one dimension."""
    records = [(str(i), np.asarray(v, dtype="<f4").ravel()) for i, v in records]
    dim = len(records[0][1]) if records else 0
    out = [MAGIC, struct.pack("<II", len(records), dim)]
    for ident, vec in records:
        if len(vec) != dim:
            raise FormatError(f"{ident}: dim {len(vec)} differs from {dim}")
        raw = ident.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise FormatError(f"id too long: {len(raw)} bytes")
        out.append(struct.pack("<H", len(raw)) + raw + vec.tobytes())
    return b"".join(out)


def loads(buf: bytes):
    """Returns ``(ids, matrix [count, dim] float32)``."""
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError("not a VEC1 embedding file")
    if len(buf) < 12:
        raise TruncatedFileError("header cut short")
    count, dim = struct.unpack_from("<II", buf, 4)
    pos = 12
    ids, rows = [], []
    for k in range(count):
        if pos + 2 > len(buf):
            raise TruncatedFileError(f"record {k}: missing id length")
        (n,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        end = pos + n + 4 * dim
        if end > len(buf):
            raise TruncatedFileError(f"record {k}: need {end - pos} bytes, {len(buf) - pos} left")
        ids.append(buf[pos : pos + n].decode("utf-8"))
        rows.append(np.frombuffer(buf, dtype="<f4", count=dim, offset=pos + n))
        pos = end
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes")
    matrix = np.stack(rows).astype(np.float32) if rows else np.zeros((0, dim), dtype=np.float32)
    return ids, matrix


def save(path, records) -> None:
    Path(path).write_bytes(dumps(records))


def load(path):
    return loads(Path(path).read_bytes())


def load_store(path) -> dict:
    """Id -> vector mapping; duplicate ids are rejected."""
    ids, matrix = load(path)
    if len(set(ids)) != len(ids):
        raise FormatError(f"{path}: duplicate ids")
    return dict(zip(ids, matrix))
