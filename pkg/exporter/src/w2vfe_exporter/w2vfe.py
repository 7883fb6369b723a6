"""Writer for the W2VFE container, implemented from its documented byte layout.

bytes 0-7 ASCII magic ``W2VFE001``; bytes 8-11 little-endian uint32 header
length; UTF-8 JSON header; data section of little-endian float32 tensors at
the offsets the header declares.  Tensors are packed contiguously in sorted
name order so identical inputs produce identical files.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

MAGIC = b"W2VFE001"


def tensor_checksum(arr: np.ndarray) -> str:
    """SHA-256 of the tensor's on-disk little-endian float32 bytes."""
    return hashlib.sha256(np.ascontiguousarray(arr, dtype="<f4").tobytes()).hexdigest()


def file_checksum(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_w2vfe(path: str, *, model_name: str, input_normalize: bool, epsilon: float,
                layers: list[dict], tensors: dict[str, np.ndarray]) -> dict:
    """Write the container and return the header that went into it."""
    entries = []
    offset = 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "dtype": "f32", "offset": offset})
        offset += arr.nbytes
    header = {
        "model_name": model_name,
        "input_normalize": bool(input_normalize),
        "epsilon": float(epsilon),
        "layers": layers,
        "tensors": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for name in sorted(tensors):
            fh.write(np.ascontiguousarray(tensors[name], dtype="<f4").tobytes())
    return header
