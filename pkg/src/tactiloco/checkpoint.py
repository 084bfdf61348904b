"""Versioned binary checkpoint container.

Layout (all little-endian):
  magic ``TLCK`` | u32 version | u32 meta_len | meta JSON (utf-8)
  | u32 tensor count | per tensor:
     u16 name_len | name utf-8 | 2-byte dtype code (``f4``/``f8``/``i8``)
     | u8 ndim | u32 dims... | raw data

Metadata is an arbitrary JSON object; callers typically store the config
hash and training seed there so a checkpoint is traceable to its run.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"TLCK"
VERSION = 1
_DTYPES = {"f4": np.dtype("<f4"), "f8": np.dtype("<f8"), "i8": np.dtype("<i8")}
_CODES = {np.dtype("float32"): "f4", np.dtype("float64"): "f8", np.dtype("int64"): "i8"}


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict | None = None):
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(meta_bytes)))
        f.write(meta_bytes)
        f.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr)
            if arr.dtype not in _CODES:
                arr = arr.astype(np.float32)
            code = _CODES[arr.dtype]
            name_b = name.encode()
            f.write(struct.pack("<H", len(name_b)))
            f.write(name_b)
            f.write(code.encode())
            f.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<I", d))
            f.write(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, meta_len = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    off = 12

    def need(n: int):
        if off + n > len(data):
            raise CheckpointError("truncated checkpoint file")

    need(meta_len)
    meta = json.loads(data[off:off + meta_len].decode())
    off += meta_len
    need(4)
    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        need(2)
        (name_len,) = struct.unpack_from("<H", data, off)
        off += 2
        need(name_len + 3)
        name = data[off:off + name_len].decode()
        off += name_len
        code = data[off:off + 2].decode()
        off += 2
        if code not in _DTYPES:
            raise CheckpointError(f"unknown dtype code {code!r}")
        (ndim,) = struct.unpack_from("<B", data, off)
        off += 1
        need(4 * ndim)
        shape = struct.unpack_from(f"<{ndim}I", data, off) if ndim else ()
        off += 4 * ndim
        n_bytes = int(np.prod(shape, dtype=np.int64)) * _DTYPES[code].itemsize if ndim else _DTYPES[code].itemsize
        n_items = n_bytes // _DTYPES[code].itemsize
        need(n_bytes)
        arr = np.frombuffer(data[off:off + n_bytes], dtype=_DTYPES[code], count=n_items)
        off += n_bytes
        tensors[name] = arr.reshape(shape).copy()
    if off != len(data):
        raise CheckpointError("trailing bytes after last tensor")
    return tensors, meta


def save_policy(path, params: dict[str, np.ndarray], meta: dict | None = None):
    save_checkpoint(path, params, meta)


def load_policy(path) -> tuple[dict[str, np.ndarray], dict]:
    tensors, meta = load_checkpoint(path)
    if "__obs_dim__" not in tensors:
        raise CheckpointError("checkpoint does not contain a policy (__obs_dim__ missing)")
    # torch wants float32 weights
    out = {k: (v if k == "__obs_dim__" else v.astype(np.float32)) for k, v in tensors.items()}
    return out, meta
