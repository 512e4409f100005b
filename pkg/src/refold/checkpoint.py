"""Binary checkpoint format.

Layout (all integers little-endian):
  magic   4 bytes  b"RFC1"
  version u32      1
  count   u32      number of entries
then per entry:
  name_len u16, name utf-8, ndim u8, dims u32 x ndim,
  payload: row-major float32, prod(dims) values.

Entries hold trainable parameters, batch-norm running statistics, and
any attached classifier weights, in the writer's order.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ContractError

MAGIC = b"RFC1"
VERSION = 1


def save_checkpoint(path, entries):
    """entries: dict or list of (name, array); arrays cast to float32."""
    if isinstance(entries, dict):
        items = list(entries.items())
    else:
        items = list(entries)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(items)))
        for name, arr in items:
            arr = np.ascontiguousarray(arr, dtype="<f4")
            nb = name.encode("utf-8")
            if len(nb) > 0xFFFF:
                raise ContractError(f"entry name too long: {name[:40]}...")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def _read_exact(f, n, what):
    data = f.read(n)
    if len(data) != n:
        raise ContractError(f"truncated checkpoint: expected {n} bytes for {what}")
    return data


def load_checkpoint(path):
    """Returns an ordered dict name -> float32 array."""
    out = {}
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise ContractError(f"{path}: not a checkpoint file (bad magic)")
        version, count = struct.unpack("<II", _read_exact(f, 8, "header"))
        if version != VERSION:
            raise ContractError(f"{path}: unsupported checkpoint version {version}")
        for i in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(f, 2, "name length"))
            name = _read_exact(f, name_len, "name").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(f, 1, "ndim"))
            dims = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim, "dims")) if ndim else ()
            n = int(np.prod(dims, dtype=np.int64)) if ndim else 1
            payload = _read_exact(f, 4 * n, f"payload of {name}")
            out[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
        if f.read(1):
            raise ContractError(f"{path}: trailing bytes after last entry")
    return out
