"""Deterministic tensor container for checkpoints.

Layout: magic line, 8-byte big-endian header length, UTF-8 JSON header
{"kind", "meta", "tensors": [{"name", "dtype", "shape"}, ...]}, then each
tensor's raw bytes in header order (C-contiguous, little-endian). The bytes
written are a pure function of the payload, so identical state produces
identical files; npz would embed zip timestamps.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointFormatError

_MAGIC = b"SSRVCKPT1\n"

# dtype tags stored in headers; little-endian on disk regardless of host.
_DTYPES = {"float64": "<f8", "float32": "<f4", "int64": "<i8"}


def write_checkpoint(path: str | Path, kind: str, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    entries = []
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        dtype = str(arr.dtype)
        if dtype not in _DTYPES:
            raise CheckpointFormatError(f"unsupported dtype {dtype} for tensor {name!r}")
        entries.append({"name": name, "dtype": dtype, "shape": list(arr.shape)})
        blobs.append(arr.astype(_DTYPES[dtype]).tobytes(order="C"))
    header = json.dumps({"kind": kind, "meta": meta, "tensors": entries},
                        sort_keys=True, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack(">Q", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_checkpoint(path: str | Path, expect_kind: str | None = None) -> tuple[str, dict, dict[str, np.ndarray]]:
    """Read a container; raises CheckpointFormatError on any malformation."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointFormatError(f"cannot read checkpoint: {exc}") from exc
    if not raw.startswith(_MAGIC):
        raise CheckpointFormatError("bad magic: not a checkpoint file")
    off = len(_MAGIC)
    if len(raw) < off + 8:
        raise CheckpointFormatError("truncated header length")
    (hlen,) = struct.unpack(">Q", raw[off:off + 8])
    off += 8
    if len(raw) < off + hlen:
        raise CheckpointFormatError("truncated header")
    try:
        header = json.loads(raw[off:off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"unparseable header: {exc}") from exc
    off += hlen
    kind = header.get("kind")
    if expect_kind is not None and kind != expect_kind:
        raise CheckpointFormatError(f"expected kind {expect_kind!r}, found {kind!r}")
    tensors: dict[str, np.ndarray] = {}
    for entry in header.get("tensors", []):
        name, dtype, shape = entry["name"], entry["dtype"], tuple(entry["shape"])
        if dtype not in _DTYPES:
            raise CheckpointFormatError(f"unsupported dtype {dtype} for tensor {name!r}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * np.dtype(_DTYPES[dtype]).itemsize
        if len(raw) < off + nbytes:
            raise CheckpointFormatError(f"truncated tensor payload for {name!r}")
        arr = np.frombuffer(raw[off:off + nbytes], dtype=_DTYPES[dtype]).reshape(shape)
        tensors[name] = arr.astype(dtype).copy()
        off += nbytes
    if off != len(raw):
        raise CheckpointFormatError("trailing bytes after last tensor")
    return kind, header.get("meta", {}), tensors
