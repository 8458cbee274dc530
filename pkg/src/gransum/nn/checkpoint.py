"""Deterministic binary checkpoint container.

Layout: magic, 8-byte little-endian header length, a canonical JSON
header (sorted keys), then the raw tensor payloads concatenated in name
order.  No timestamps or environment data are recorded, so identical
models serialize to identical bytes, and round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"GRANSUMCKPT\n"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Unreadable or incompatible checkpoint."""


@dataclass
class Checkpoint:
    kind: str
    hyper: dict
    tensors: dict[str, np.ndarray]
    seed: int
    step: int
    version: int = field(default=FORMAT_VERSION)


def save_checkpoint(ckpt: Checkpoint, path: str) -> None:
    entries = []
    payload = bytearray()
    for name in sorted(ckpt.tensors):
        arr = np.ascontiguousarray(ckpt.tensors[name])
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        data = arr.tobytes()
        entries.append(
            {
                "name": name,
                "dtype": arr.dtype.str,
                "shape": list(arr.shape),
                "offset": len(payload),
                "nbytes": len(data),
            }
        )
        payload.extend(data)
    header = json.dumps(
        {
            "version": ckpt.version,
            "kind": ckpt.kind,
            "hyper": ckpt.hyper,
            "seed": ckpt.seed,
            "step": ckpt.step,
            "tensors": entries,
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(bytes(payload))


def load_checkpoint(path: str, expect_kind: str | None = None) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        payload = fh.read()
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {header.get('version')!r}"
        )
    if expect_kind is not None and header["kind"] != expect_kind:
        raise CheckpointError(
            f"{path}: checkpoint kind {header['kind']!r}, expected {expect_kind!r}"
        )
    tensors = {}
    for e in header["tensors"]:
        raw = payload[e["offset"]:e["offset"] + e["nbytes"]]
        tensors[e["name"]] = np.frombuffer(raw, dtype=np.dtype(e["dtype"])).reshape(
            e["shape"]
        ).copy()
    return Checkpoint(
        kind=header["kind"],
        hyper=header["hyper"],
        tensors=tensors,
        seed=header["seed"],
        step=header["step"],
        version=header["version"],
    )
