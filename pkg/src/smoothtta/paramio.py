"""Versioned binary container for trained parameter blocks.

One format shared by the decoder and the backbones: a magic tag, a JSON
header (arbitrary metadata plus the ordered block manifest), then raw
row-major float64 blocks. Round-trips are bit-exact.
"""

from __future__ import annotations

import json

import numpy as np

MAGIC = b"STPB"
FORMAT_VERSION = 1


def save_blocks(path, header: dict, blocks: dict[str, np.ndarray]) -> None:
    manifest = []
    payload = []
    for name, arr in blocks.items():
        arr = np.asarray(arr, dtype=np.float64)
        manifest.append({"name": name, "shape": list(arr.shape)})
        payload.append(np.ascontiguousarray(arr).tobytes(order="C"))
    head = dict(header)
    head["_format_version"] = FORMAT_VERSION
    head["_blocks"] = manifest
    head_bytes = json.dumps(head, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(head_bytes).to_bytes(8, "little"))
        fh.write(head_bytes)
        for chunk in payload:
            fh.write(chunk)


def load_blocks(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"not a parameter container (bad magic {magic!r})")
        head_len = int.from_bytes(fh.read(8), "little")
        head = json.loads(fh.read(head_len).decode("utf-8"))
        if head.get("_format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported container version {head.get('_format_version')}")
        blocks = {}
        for entry in head.pop("_blocks"):
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(count * 8), dtype=np.float64, count=count)
            blocks[entry["name"]] = data.reshape(shape).copy()
        head.pop("_format_version", None)
    return head, blocks
