"""Versioned binary parameter container.

Layout, all integers little-endian:

    magic     8 bytes   b"SAWRCKPT"
    version   uint32    currently 1
    count     uint32    number of entries
    entry * count:
        name_len  uint16
        name      utf-8 bytes
        precision uint8     0 = float64, 1 = float32, 2 = raw bytes (uint8)
        ndim      uint8
        dims      ndim * uint32
        data      raw little-endian floats, C order
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .errors import DataError

MAGIC = b"SAWRCKPT"
VERSION = 1
_PREC = {"f64": (0, "<f8"), "f32": (1, "<f4")}
_PREC_BY_TAG = {0: "<f8", 1: "<f4", 2: "<u1"}
_BYTES_TAG = 2


def save_checkpoint(path, state: dict[str, np.ndarray], precision: str = "f64"):
    if precision not in _PREC:
        raise ValueError(f"precision must be one of {sorted(_PREC)}, got {precision!r}")
    tag, dtype = _PREC[precision]
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(state)))
        for name, arr in state.items():
            raw = name.encode("utf-8")
            arr = np.ascontiguousarray(arr)
            # uint8 entries (serialized metadata blobs) bypass the float cast
            entry_tag, entry_dtype = ((_BYTES_TAG, "<u1") if arr.dtype == np.uint8
                                      else (tag, dtype))
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(struct.pack("<BB", entry_tag, arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.astype(entry_dtype).tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MAGIC:
        raise DataError(f"{path}: not a checkpoint (bad magic)")
    version, count = struct.unpack_from("<II", blob, 8)
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    off = 16
    state: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off:off + name_len].decode("utf-8")
        off += name_len
        tag, ndim = struct.unpack_from("<BB", blob, off)
        off += 2
        if tag not in _PREC_BY_TAG:
            raise DataError(f"{path}: unknown precision tag {tag} for {name}")
        shape = struct.unpack_from(f"<{ndim}I", blob, off)
        off += 4 * ndim
        dtype = np.dtype(_PREC_BY_TAG[tag])
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        arr = np.frombuffer(blob[off:off + nbytes], dtype=dtype).reshape(shape)
        off += nbytes
        if tag == _BYTES_TAG:
            state[name] = arr.copy()
        else:
            state[name] = arr.astype(np.float64) if tag == 0 else arr.astype(np.float32)
    if off != len(blob):
        raise DataError(f"{path}: {len(blob) - off} trailing bytes")
    return state


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
