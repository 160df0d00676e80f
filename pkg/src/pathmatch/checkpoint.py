"""Parameter checkpoints: length-prefixed binary records plus a JSON manifest.

Record layout, little-endian, repeated until end of file:
    u32 name length | name bytes (utf-8) | u8 ndim | u64 * ndim shape |
    f64 * prod(shape) values
"""

from __future__ import annotations

import json
import os
import struct
from typing import Mapping

import numpy as np

PARAMS_FILE = "params.bin"
MANIFEST_FILE = "manifest.json"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Corrupt or inconsistent checkpoint."""


def save_checkpoint(dir_path: str, arrays: Mapping[str, np.ndarray], manifest: dict) -> None:
    os.makedirs(dir_path, exist_ok=True)
    with open(os.path.join(dir_path, PARAMS_FILE), "wb") as fh:
        for name in sorted(arrays):
            arr = np.asarray(arrays[name], dtype=np.float64)
            # ascontiguousarray would promote 0-d arrays to 1-d; keep them 0-d.
            if arr.ndim and not arr.flags["C_CONTIGUOUS"]:
                arr = np.ascontiguousarray(arr)
            name_b = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.astype("<f8").tobytes())
    doc = dict(manifest)
    doc["format_version"] = FORMAT_VERSION
    with open(os.path.join(dir_path, MANIFEST_FILE), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_checkpoint(dir_path: str) -> tuple[dict[str, np.ndarray], dict]:
    params_path = os.path.join(dir_path, PARAMS_FILE)
    manifest_path = os.path.join(dir_path, MANIFEST_FILE)
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version in {manifest_path}")
    arrays: dict[str, np.ndarray] = {}
    with open(params_path, "rb") as fh:
        blob = fh.read()
    off = 0
    try:
        while off < len(blob):
            (name_len,) = struct.unpack_from("<I", blob, off)
            off += 4
            name = blob[off : off + name_len].decode("utf-8")
            off += name_len
            (ndim,) = struct.unpack_from("<B", blob, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}Q", blob, off)
            off += 8 * ndim
            count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off).reshape(shape)
            off += 8 * count
            arrays[name] = arr.copy()
    except (struct.error, ValueError) as e:
        raise CheckpointError(f"corrupt checkpoint {params_path}: {e}") from e
    if off != len(blob):
        raise CheckpointError(f"trailing bytes in {params_path}")
    return arrays, manifest
